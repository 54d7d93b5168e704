"""Exception hierarchy shared by all modules."""


class GaussVPError(Exception):
    """Base class for every error raised by the package."""


# kernel
class KernelError(GaussVPError):
    pass


class CoincidentNodes(KernelError):
    pass


class DomainError(KernelError, ValueError):
    pass


class NotSymmetric(KernelError):
    pass


class NotPositiveDefinite(KernelError):
    pass


# condenser
class CondenserError(GaussVPError):
    pass


class ValidationError(CondenserError):
    """Structural violations; ``violations`` holds the offending records."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class EmptyStep(CondenserError):
    pass


# measure
class MeasureError(GaussVPError):
    pass


class CondenserMismatch(MeasureError):
    pass


class InvalidMeasure(MeasureError, ValueError):
    pass


class NegativeRadicand(MeasureError):
    pass


# solver / certify
class Infeasible(GaussVPError):
    def __init__(self, message, reasons=()):
        super().__init__(message)
        self.reasons = list(reasons)


class AllInfinite(GaussVPError):
    pass


class InfeasibleInput(GaussVPError):
    pass


class DegenerateGram(GaussVPError):
    pass


# exhaust
class StepInfeasible(GaussVPError):
    def __init__(self, step, message=""):
        super().__init__(f"exhaustion step {step} is infeasible" + (f": {message}" if message else ""))
        self.step = step


class ZeroRestrictedMass(GaussVPError):
    def __init__(self, plate):
        super().__init__(f"measure has zero g-mass on the restricted node set of plate {plate}")
        self.plate = plate


# io
class ParseError(GaussVPError):
    def __init__(self, location, message):
        super().__init__(f"{location}: {message}")
        self.location = location


class SchemaError(GaussVPError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class MissingData(GaussVPError):
    pass


class MaxItersExceeded(UserWarning):
    """Emitted (not raised) when a solve stops on the iteration cap."""

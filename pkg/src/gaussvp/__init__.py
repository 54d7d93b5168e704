"""Weighted vector equilibrium problems on finite signed condensers.

Kernels and Gram matrices live in :mod:`gaussvp.kernel`, plate families in
:mod:`gaussvp.condenser`, measures and energies in :mod:`gaussvp.measure`.
:func:`solve` finds the equilibrium measure, :func:`certify_equilibrium`
checks it, and :func:`run_exhaustion` follows it along nested sub-condensers.
"""
__version__ = "0.1.0"

from .certify import (CapacityResult, CertificateResult, EtaCertificate, UniquenessReport,
                      certify_equilibrium, check_eta_certificate, scalar_equilibrium, uniqueness_battery)
from .condenser import (Condenser, ExhaustionSchedule, Plate, ValidationReport, Violation, check_cross_sup,
                        check_mass_summability, make_exhaustion, validate_condenser)
from .errors import *  # noqa: F401,F403
from .exhaust import ExhaustionReport, renormalize_restriction, run_exhaustion
from .kernel import (EffectiveRadius, ExcludeDiagonal, Explicit, Kernel, assemble_gram,
                     check_positive_definite, kernel_eval)
from .measure import (DiscreteVectorMeasure, ExternalField, ScalarSignedMeasure, energy, field_pairing,
                      field_values, mutual_energy, r_map, scalar_energy, scalar_potential, semimetric_distance,
                      vector_potential, vector_potentials, weighted_energy, weighted_potential,
                      weighted_potentials)
from .problem import ProblemFile, parse_problem, serialize_problem
from .solver import (EquilibriumReport, Given, SolverConfig, Vertex, check_feasibility, duality_gap,
                     initial_measure, linear_minimization_oracle, solve)

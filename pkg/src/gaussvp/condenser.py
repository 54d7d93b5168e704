"""Signed plate families (condensers), structural validation, exhaustion schedules."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial.distance import cdist

from .errors import EmptyStep, ValidationError
from .kernel import Kernel, as_nodes, pair_values

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Plate:
    """One plate: its sign, node set, positive weight ``g`` per node and mass ``a``.

    ``g`` may be given as a scalar, meaning a constant weight.  Nothing is
    validated here; see :func:`validate_condenser`.
    """

    sign: int
    nodes: np.ndarray
    g: np.ndarray
    mass: float

    def __post_init__(self):
        nodes = as_nodes(self.nodes) if np.size(self.nodes) else np.zeros((0, 1))
        g = np.asarray(self.g, dtype=float)
        if g.ndim == 0:
            g = np.full(len(nodes), float(g))
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "g", g.reshape(-1))
        object.__setattr__(self, "mass", float(self.mass))

    @property
    def n(self):
        return len(self.nodes)


@dataclass(frozen=True, eq=False)
class Condenser:
    plates: tuple
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "plates", tuple(self.plates))

    def __len__(self):
        return len(self.plates)

    @property
    def signs(self):
        return np.array([p.sign for p in self.plates], dtype=float)

    @property
    def masses(self):
        return np.array([p.mass for p in self.plates])

    @property
    def sizes(self):
        return np.array([p.n for p in self.plates], dtype=int)

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.sizes)])

    @property
    def plate_index(self):
        """Plate id of every stacked node."""
        return np.repeat(np.arange(len(self.plates)), self.sizes)

    @property
    def nodes(self):
        """All plate nodes stacked in plate order (shared nodes repeat)."""
        return np.vstack([p.nodes for p in self.plates])

    @property
    def g(self):
        return np.concatenate([p.g for p in self.plates])

    @property
    def node_signs(self):
        return np.repeat(self.signs, self.sizes)

    @property
    def positive(self):
        return [i for i, p in enumerate(self.plates) if p.sign > 0]

    @property
    def negative(self):
        return [i for i, p in enumerate(self.plates) if p.sign < 0]

    @property
    def separation(self):
        """Minimum distance between positive-plate and negative-plate nodes."""
        if not self.negative or not self.positive:
            return math.inf
        pos = np.vstack([self.plates[i].nodes for i in self.positive])
        neg = np.vstack([self.plates[i].nodes for i in self.negative])
        return float(cdist(pos, neg).min())

    def split(self, flat):
        """Cut a stacked per-node array into per-plate pieces."""
        off = self.offsets
        return [np.asarray(flat[off[i]:off[i + 1]]) for i in range(len(self.plates))]

    def bind(self, kernel: Kernel) -> Kernel:
        """Kernel with its diagonal radius fixed by this condenser's node spacing."""
        return kernel.bind(self.nodes)

    def gram(self, kernel: Kernel) -> np.ndarray:
        """Kernel matrix over all stacked nodes (cached per kernel object)."""
        hit = self._cache.get(id(kernel))
        if hit is not None and hit[0] is kernel:
            return hit[1]
        kb = self.bind(kernel)
        K = pair_values(kb, self.nodes, self.nodes)
        K = 0.5 * (K + K.T)
        K.setflags(write=False)
        self._cache[id(kernel)] = (kernel, K)
        return K

    def restrict(self, subsets) -> "Condenser":
        """Sub-condenser keeping ``subsets[i]`` (node indices) of each plate."""
        plates = []
        for p, idx in zip(self.plates, subsets):
            idx = np.asarray(idx, dtype=int)
            plates.append(Plate(p.sign, p.nodes[idx], p.g[idx], p.mass))
        return Condenser(plates)


class Violation(NamedTuple):
    code: str
    plate: int | None
    detail: str


class ValidationReport(NamedTuple):
    ok: bool
    violations: list
    # local finiteness holds for any finite plate family
    locally_finite: bool = True

    def raise_if_invalid(self):
        if not self.ok:
            codes = ", ".join(v.code for v in self.violations)
            raise ValidationError(f"invalid condenser: {codes}", self.violations)


def validate_condenser(c: Condenser) -> ValidationReport:
    out = []
    for i, p in enumerate(c.plates):
        if p.sign not in (1, -1):
            out.append(Violation("BadSign", i, f"sign {p.sign!r} not in {{+1, -1}}"))
        if not (np.isfinite(p.mass) and p.mass > 0):
            out.append(Violation("NonPositiveMass", i, f"mass {p.mass}"))
        if p.n == 0:
            out.append(Violation("EmptyPlate", i, "plate has no nodes"))
            continue
        if not np.all(np.isfinite(p.nodes)):
            out.append(Violation("NonFiniteNode", i, "node coordinates must be finite"))
        if len(p.g) != p.n:
            out.append(Violation("LengthMismatch", i, f"{len(p.g)} g values for {p.n} nodes"))
        elif not np.all(np.isfinite(p.g) & (p.g > 0)):
            bad = int(np.flatnonzero(~(np.isfinite(p.g) & (p.g > 0)))[0])
            out.append(Violation("NonPositiveG", i, f"g[{bad}] = {p.g[bad]}"))
        if len(np.unique(p.nodes, axis=0)) < p.n:
            out.append(Violation("DuplicateNode", i, "nodes within a plate must be distinct"))
    plates_ok = all(p.n for p in c.plates)
    if plates_ok and c.positive and c.negative:
        pos = np.vstack([c.plates[i].nodes for i in c.positive])
        neg = np.vstack([c.plates[i].nodes for i in c.negative])
        d = cdist(pos, neg)
        if np.any(d == 0):
            out.append(Violation("SharedNodeAcrossSigns", None, "oppositely signed plates share a node"))
        elif not d.min() > 0:
            out.append(Violation("ZeroSeparation", None, "oppositely signed plates are not separated"))
    return ValidationReport(not out, out)


class CrossSup(NamedTuple):
    sup_cross: float
    finite: bool
    no_negative_plates: bool


def check_cross_sup(c: Condenser, k: Kernel) -> CrossSup:
    """Largest kernel value between a positive-plate and a negative-plate node."""
    if not c.negative or not c.positive:
        return CrossSup(-math.inf, True, not c.negative)
    kb = c.bind(k)
    pos = np.vstack([c.plates[i].nodes for i in c.positive])
    neg = np.vstack([c.plates[i].nodes for i in c.negative])
    sup = float(pair_values(kb, pos, neg).max())
    return CrossSup(sup, bool(np.isfinite(sup)), False)


class MassSummability(NamedTuple):
    total: float
    per_plate: np.ndarray
    g_inf: np.ndarray
    degenerate: bool


def check_mass_summability(c: Condenser, g_floor: float = 1e-6) -> MassSummability:
    """Terms ``a_i / min g_i``; ``degenerate`` flags a plate whose min g is below ``g_floor``."""
    g_inf = np.array([p.g.min() for p in c.plates])
    per = c.masses / g_inf
    degenerate = bool(np.any(g_inf < g_floor))
    if degenerate:
        log.warning("plate weight g nearly vanishes (min %.3g); mass sum %.6g", g_inf.min(), per.sum())
    return MassSummability(float(per.sum()), per, g_inf, degenerate)


@dataclass(frozen=True)
class ExhaustionSchedule:
    """Nested node-index subsets per plate; ``steps[m][i]`` indexes plate ``i``."""

    steps: tuple

    def __len__(self):
        return len(self.steps)

    def is_nested(self):
        for a, b in zip(self.steps, self.steps[1:]):
            for sa, sb in zip(a, b):
                if not set(sa.tolist()) <= set(sb.tolist()):
                    return False
        return True


_ORDERS = {"index": "index", "byindex": "index", "centroid": "centroid", "bydistancefromcentroid": "centroid"}


def make_exhaustion(c: Condenser, num_steps: int, order: str = "index") -> ExhaustionSchedule:
    """Step ``m`` (1-based) of an ``n``-node plate keeps ``ceil(n*m/num_steps)`` nodes.

    ``order="centroid"`` admits nodes by increasing distance from the plate
    centroid (ties by index); ``order="index"`` takes index prefixes.
    """
    if num_steps < 1:
        raise ValueError("num_steps must be >= 1")
    key = _ORDERS.get(str(order).lower().replace("_", ""))
    if key is None:
        raise ValueError(f"unknown exhaustion order {order!r}")
    orders = []
    for i, p in enumerate(c.plates):
        if p.n == 0:
            raise EmptyStep(f"plate {i} has no nodes")
        if key == "index":
            orders.append(np.arange(p.n))
        else:
            d = np.linalg.norm(p.nodes - p.nodes.mean(axis=0), axis=1)
            orders.append(np.argsort(d, kind="stable"))
    steps = []
    for m in range(1, num_steps + 1):
        step = []
        for i, (p, o) in enumerate(zip(c.plates, orders)):
            size = math.ceil(p.n * m / num_steps)
            if size == 0:
                raise EmptyStep(f"step {m} leaves plate {i} empty")
            step.append(np.sort(o[:size]))
        steps.append(tuple(step))
    return ExhaustionSchedule(tuple(steps))

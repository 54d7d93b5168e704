"""Discrete vector measures and the quantities built from them.

A vector measure puts nonnegative weights on the nodes of every plate.  All
bilinear quantities are evaluated on the stacked node list of the condenser:
with ``s`` the per-node plate sign and ``K`` the stacked Gram matrix,

    energy(mu, nu)   = (s*w_mu) @ K @ (s*w_nu)
    potential(mu)[p] = s[p] * (K @ (s*w_mu))[p]

Field values may be ``+inf`` at some nodes.  Pairings use the convention
``0 * inf = 0``, so a node without weight never makes a sum infinite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .condenser import Condenser
from .errors import CondenserMismatch, InvalidMeasure, NegativeRadicand
from .kernel import Kernel, as_nodes, pair_values

RADICAND_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class DiscreteVectorMeasure:
    condenser: Condenser
    weights: tuple

    def __post_init__(self):
        c = self.condenser
        if len(self.weights) != len(c.plates):
            raise InvalidMeasure(f"{len(self.weights)} weight vectors for {len(c.plates)} plates")
        ws = []
        for i, (w, p) in enumerate(zip(self.weights, c.plates)):
            w = np.array(w, dtype=float).reshape(-1)
            if len(w) != p.n:
                raise InvalidMeasure(f"plate {i}: {len(w)} weights for {p.n} nodes")
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise InvalidMeasure(f"plate {i}: weights must be finite and nonnegative")
            w.setflags(write=False)
            ws.append(w)
        object.__setattr__(self, "weights", tuple(ws))

    @classmethod
    def from_flat(cls, c: Condenser, flat):
        return cls(c, tuple(c.split(np.asarray(flat, dtype=float))))

    @classmethod
    def zeros(cls, c: Condenser):
        return cls(c, tuple(np.zeros(p.n) for p in c.plates))

    @property
    def flat(self):
        return np.concatenate(self.weights)

    def __repr__(self):
        ws = ", ".join(np.array2string(w, precision=6) for w in self.weights)
        return f"DiscreteVectorMeasure([{ws}])"


class ScalarSignedMeasure:
    """Finite signed atomic measure; coincident atoms are merged by summation."""

    def __init__(self, points=(), weights=()):
        w = np.asarray(weights, dtype=float).reshape(-1)
        if len(w) == 0:
            self.points = np.zeros((0, 0))
            self.weights = np.zeros(0)
            return
        pts = as_nodes(points)
        if len(pts) != len(w):
            raise InvalidMeasure("points and weights differ in length")
        uniq, inv = np.unique(pts, axis=0, return_inverse=True)
        merged = np.zeros(len(uniq))
        np.add.at(merged, inv.reshape(-1), w)
        keep = merged != 0
        self.points = uniq[keep]
        self.weights = merged[keep]

    @classmethod
    def from_atoms(cls, atoms):
        """Build from a ``{point: weight}`` mapping or ``(point, weight)`` pairs."""
        items = list(atoms.items()) if isinstance(atoms, dict) else list(atoms)
        if not items:
            return cls()
        pts = [np.atleast_1d(np.asarray(p, dtype=float)) for p, _ in items]
        return cls(np.vstack(pts), [w for _, w in items])

    def as_dict(self):
        return {tuple(float(v) for v in p): float(w) for p, w in zip(self.points, self.weights)}

    def __len__(self):
        return len(self.weights)

    def _combine(self, other, sign):
        if len(other) == 0:
            return self
        if len(self) == 0:
            return ScalarSignedMeasure(other.points, sign * other.weights)
        return ScalarSignedMeasure(np.vstack([self.points, other.points]),
                                   np.concatenate([self.weights, sign * other.weights]))

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __neg__(self):
        return ScalarSignedMeasure(self.points, -self.weights) if len(self) else self

    def __mul__(self, t):
        return ScalarSignedMeasure(self.points, t * self.weights) if len(self) and t else ScalarSignedMeasure()

    __rmul__ = __mul__

    @property
    def positive_part(self):
        m = self.weights > 0
        return ScalarSignedMeasure(self.points[m], self.weights[m]) if m.any() else ScalarSignedMeasure()

    @property
    def negative_part(self):
        m = self.weights < 0
        return ScalarSignedMeasure(self.points[m], -self.weights[m]) if m.any() else ScalarSignedMeasure()

    def __repr__(self):
        return f"ScalarSignedMeasure({self.as_dict()!r})"


FIELD_MODES = ("tabulated", "scalar_source", "vector_source", "lsc")


@dataclass(frozen=True, eq=False)
class ExternalField:
    """External field on the plates.

    ``tabulated``      per-node values, ``+inf`` allowed (``values=None`` is f = 0)
    ``lsc``            per-node values that must be nonnegative
    ``scalar_source``  f_i = sign_i * potential of the scalar measure ``source``
    ``vector_source``  same with ``source`` a vector measure, through its R-image
    """

    mode: str = "tabulated"
    values: tuple | None = None
    source: object = None

    def __post_init__(self):
        if self.mode not in FIELD_MODES:
            raise ValueError(f"unknown field mode {self.mode!r}")
        if self.values is not None:
            vals = tuple(np.array(v, dtype=float).reshape(-1) for v in self.values)
            for i, v in enumerate(vals):
                if np.any(np.isnan(v)) or np.any(v == -np.inf):
                    raise ValueError(f"field values on plate {i} must be finite or +inf")
                if self.mode == "lsc" and np.any(v < 0):
                    raise ValueError(f"lsc field must be nonnegative (plate {i})")
            object.__setattr__(self, "values", vals)

    @classmethod
    def zero(cls):
        return cls("tabulated")

    @classmethod
    def tabulated(cls, values):
        return cls("tabulated", values=values)

    @classmethod
    def lsc(cls, values):
        return cls("lsc", values=values)

    @classmethod
    def scalar_source(cls, sigma: ScalarSignedMeasure):
        return cls("scalar_source", source=sigma)

    @classmethod
    def vector_source(cls, nu: DiscreteVectorMeasure):
        return cls("vector_source", source=nu)

    @property
    def is_zero(self):
        return self.mode in ("tabulated", "lsc") and self.values is None


def _same_condenser(mu, mu1):
    if mu.condenser is not mu1.condenser:
        raise CondenserMismatch("measures live on different condensers")
    return mu.condenser


def mutual_energy(k: Kernel, mu: DiscreteVectorMeasure, mu1: DiscreteVectorMeasure) -> float:
    c = _same_condenser(mu, mu1)
    s = c.node_signs
    return float((s * mu.flat) @ c.gram(k) @ (s * mu1.flat))


def energy(k: Kernel, mu: DiscreteVectorMeasure) -> float:
    return mutual_energy(k, mu, mu)


def vector_potentials(k: Kernel, mu: DiscreteVectorMeasure) -> list:
    """Vector potential at every node, as per-plate arrays."""
    c = mu.condenser
    s = c.node_signs
    return c.split(s * (c.gram(k) @ (s * mu.flat)))


def vector_potential(k: Kernel, mu: DiscreteVectorMeasure, plate: int, x) -> float:
    """Component ``plate`` of the vector potential at ``x``.

    ``x`` is a node index of that plate, or a point (off-grid evaluation).
    """
    c = mu.condenser
    s = c.node_signs
    if isinstance(x, (int, np.integer)):
        p = c.offsets[plate] + int(x)
        return float(s[p] * (c.gram(k)[p] @ (s * mu.flat)))
    kb = c.bind(k)
    row = pair_values(kb, _points(k, x), c.nodes)[0]
    return float(c.plates[plate].sign * (row @ (s * mu.flat)))


def r_map(mu: DiscreteVectorMeasure) -> ScalarSignedMeasure:
    c = mu.condenser
    return ScalarSignedMeasure(c.nodes, c.node_signs * mu.flat)


def _points(k, x):
    x = np.asarray(x, dtype=float)
    return x.reshape(-1, 1) if k.is_custom else np.atleast_2d(x)


def _bound_for(k, *measures):
    if k.is_bound:
        return k
    pts = [m.points for m in measures if len(m)]
    return k.bind(np.vstack(pts))


def scalar_energy(k: Kernel, s: ScalarSignedMeasure, s1: ScalarSignedMeasure) -> float:
    """Mutual energy of two atomic signed measures.

    An unbound ``EffectiveRadius`` is resolved from the union of the atoms;
    pass ``condenser.bind(k)`` to compare with condenser energies.
    """
    if len(s) == 0 or len(s1) == 0:
        return 0.0
    kb = _bound_for(k, s, s1)
    return float(s.weights @ pair_values(kb, s.points, s1.points) @ s1.weights)


def scalar_potential(k: Kernel, s: ScalarSignedMeasure, x) -> np.ndarray:
    """Potential of ``s`` at the point(s) ``x``."""
    x = _points(k, x)
    if len(s) == 0:
        return np.zeros(len(x))
    kb = _bound_for(k, s)
    return pair_values(kb, x, s.points) @ s.weights


def semimetric_distance(k: Kernel, mu1: DiscreteVectorMeasure, mu2: DiscreteVectorMeasure,
                        tol: float = RADICAND_TOL) -> float:
    c = _same_condenser(mu1, mu2)
    d = c.node_signs * (mu1.flat - mu2.flat)
    rad = float(d @ c.gram(k) @ d)
    if rad < -tol:
        raise NegativeRadicand(f"squared distance {rad:.3e} is negative; Gram is not PSD")
    return math.sqrt(max(rad, 0.0))


def field_values(f: ExternalField, k: Kernel, c: Condenser) -> list:
    """Field values on every node, as per-plate arrays (``+inf`` allowed)."""
    if not isinstance(f, ExternalField):
        vals = [np.asarray(v, dtype=float).reshape(-1) for v in f]
        _check_lengths(vals, c)
        return vals
    key = ("field", id(f), id(k))
    hit = c._cache.get(key)
    if hit is not None and hit[0] is f and hit[1] is k:
        return hit[2]
    if f.mode in ("tabulated", "lsc"):
        vals = [np.zeros(p.n) for p in c.plates] if f.values is None else [v.copy() for v in f.values]
        _check_lengths(vals, c)
    else:
        sigma = r_map(f.source) if f.mode == "vector_source" else f.source
        if len(sigma) == 0:
            vals = [np.zeros(p.n) for p in c.plates]
        else:
            pot = pair_values(c.bind(k), c.nodes, sigma.points) @ sigma.weights
            vals = c.split(c.node_signs * pot)
    for v in vals:
        v.setflags(write=False)
    c._cache[key] = (f, k, vals)
    return vals


def _check_lengths(vals, c):
    if len(vals) != len(c.plates) or any(len(v) != p.n for v, p in zip(vals, c.plates)):
        raise ValueError("field values do not match the plate node counts")


def infinite_everywhere(values) -> list:
    """Plates on which the field is ``+inf`` at every node."""
    return [i for i, v in enumerate(values) if len(v) and np.all(np.isinf(v))]


def pairing(values, weights) -> float:
    """Sum of ``value * weight`` with ``0 * inf = 0``."""
    v = np.concatenate([np.asarray(x, dtype=float) for x in values]) if isinstance(values, (list, tuple)) else values
    w = np.concatenate(weights) if isinstance(weights, (list, tuple)) else weights
    on = w > 0
    return float(np.sum(v[on] * w[on]))


def field_pairing(k: Kernel, mu: DiscreteVectorMeasure, f) -> float:
    return pairing(field_values(f, k, mu.condenser), mu.flat)


def weighted_potentials(k: Kernel, mu: DiscreteVectorMeasure, f) -> list:
    fv = field_values(f, k, mu.condenser)
    return [p + v for p, v in zip(vector_potentials(k, mu), fv)]


def weighted_potential(k: Kernel, mu: DiscreteVectorMeasure, f, plate: int, x: int) -> float:
    fv = field_values(f, k, mu.condenser)[plate][int(x)]
    if np.isinf(fv):
        return math.inf
    return vector_potential(k, mu, plate, int(x)) + float(fv)


def weighted_energy(k: Kernel, mu: DiscreteVectorMeasure, f) -> float:
    fp = field_pairing(k, mu, f)
    if np.isinf(fp):
        return math.inf
    return energy(k, mu) + 2.0 * fp


def g_mass(c: Condenser, mu: DiscreteVectorMeasure, plate: int) -> float:
    return float(c.plates[plate].g @ mu.weights[plate])


def g_masses(mu: DiscreteVectorMeasure) -> np.ndarray:
    return np.array([p.g @ w for p, w in zip(mu.condenser.plates, mu.weights)])

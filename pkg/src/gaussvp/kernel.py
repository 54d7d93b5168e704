"""Interaction kernels, Gram assembly and positive-definiteness checks.

Nodes are points in R^dim stored as ``(n, dim)`` float arrays.  For a
:meth:`Kernel.custom` kernel the nodes are integer indices into the stored
matrix, stored as ``(n, 1)`` arrays.

The point kernels are infinite on the diagonal, so every Gram matrix needs a
diagonal policy.  ``EffectiveRadius(scale)`` replaces ``k(x, x)`` by the
kernel evaluated at ``radius = scale * h`` where ``h`` is the minimum spacing
of the node set.  For the Newtonian kernel (and for ``-log`` in the plane) this
is exactly the self-energy of a uniform charge on a sphere (circle) of that
radius, while the off-diagonal entries are the mutual energies of two such
shells, so the Gram matrix is a genuine energy matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Union

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import CoincidentNodes, DomainError, KernelError, NotSymmetric

FAMILIES = ("riesz", "newtonian", "log_unit_ball", "custom")


@dataclass(frozen=True)
class EffectiveRadius:
    """Evaluate the kernel at ``radius`` on coincident nodes.

    ``radius`` is left unset until the policy is bound to a node set (see
    :meth:`Kernel.bind`); binding computes ``scale * min spacing``.
    """

    scale: float = 0.5
    radius: float | None = None


@dataclass(frozen=True)
class Explicit:
    """Use the given diagonal value(s); a sequence is aligned with the row nodes."""

    values: Union[float, tuple]


@dataclass(frozen=True)
class ExcludeDiagonal:
    """Coincident nodes are an error."""


DiagonalPolicy = Union[EffectiveRadius, Explicit, ExcludeDiagonal, None]


@dataclass(frozen=True, eq=False)
class Kernel:
    family: str
    alpha: float | None = None
    dim: int | None = None
    matrix: np.ndarray | None = field(default=None, repr=False)
    diagonal: DiagonalPolicy = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise KernelError(f"unknown kernel family {self.family!r}")
        if self.family == "custom":
            m = np.array(self.matrix, dtype=float)
            if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
                raise KernelError("custom kernel needs a nonempty square matrix")
            if not np.all(np.isfinite(m)):
                raise KernelError("custom kernel matrix has non-finite entries")
            _require_symmetric(m)
            m.setflags(write=False)
            object.__setattr__(self, "matrix", m)
            return
        if self.family == "log_unit_ball":
            object.__setattr__(self, "dim", 2)
        elif self.family == "newtonian":
            if self.dim is None or int(self.dim) < 3:
                raise KernelError("Newtonian kernel requires dim >= 3")
            object.__setattr__(self, "alpha", 2.0)
        else:
            if self.alpha is None or self.dim is None:
                raise KernelError("Riesz kernel needs alpha and dim")
            if not 0 < self.alpha < self.dim:
                raise KernelError(f"Riesz kernel requires 0 < alpha < dim, got alpha={self.alpha}, dim={self.dim}")
        object.__setattr__(self, "dim", int(self.dim))
        if self.diagonal is None:
            object.__setattr__(self, "diagonal", EffectiveRadius())

    # constructors ---------------------------------------------------------
    @classmethod
    def riesz(cls, alpha, dim, diagonal=None):
        return cls("riesz", alpha=float(alpha), dim=int(dim), diagonal=diagonal)

    @classmethod
    def newtonian(cls, dim=3, diagonal=None):
        return cls("newtonian", dim=int(dim), diagonal=diagonal)

    @classmethod
    def log_unit_ball(cls, diagonal=None):
        return cls("log_unit_ball", dim=2, diagonal=diagonal)

    @classmethod
    def custom(cls, matrix, diagonal=None):
        return cls("custom", matrix=matrix, diagonal=diagonal)

    @property
    def is_custom(self):
        return self.family == "custom"

    @property
    def is_bound(self):
        d = self.diagonal
        return not isinstance(d, EffectiveRadius) or d.radius is not None or self.is_custom

    def bind(self, nodes, extra=None):
        """Return a copy whose ``EffectiveRadius`` has a concrete radius.

        The spacing is taken over ``nodes``; for ``log_unit_ball`` the radius is
        additionally capped by the distance from the node set (and ``extra``)
        to the unit circle.  Already bound kernels are returned unchanged.
        """
        if self.is_bound:
            return self
        pts = as_nodes(nodes)
        h = min_spacing(pts)
        radius = self.diagonal.scale * h
        if self.family == "log_unit_ball":
            allpts = pts if extra is None else np.vstack([pts, as_nodes(extra)])
            radius = min(radius, 1.0 - np.linalg.norm(allpts, axis=1).max())
            if radius <= 0:
                raise DomainError("log_unit_ball nodes must lie strictly inside the unit disk")
        return replace(self, diagonal=replace(self.diagonal, radius=float(radius)))

    def off_diagonal(self, dist):
        """Kernel as a function of distance (valid for ``dist > 0``)."""
        dist = np.asarray(dist, dtype=float)
        if self.family == "log_unit_ball":
            return -np.log(dist)
        return dist ** (self.alpha - self.dim)

    def diagonal_value(self):
        d = self.diagonal
        if isinstance(d, EffectiveRadius):
            if d.radius is None:
                raise KernelError("EffectiveRadius policy is unbound; call Kernel.bind(nodes) first")
            return float(self.off_diagonal(d.radius))
        if isinstance(d, Explicit) and np.ndim(d.values) == 0:
            return float(d.values)
        raise KernelError(f"diagonal policy {d!r} has no single diagonal value")


class GramBlock(NamedTuple):
    rows: object
    cols: object
    values: np.ndarray


class PSDResult(NamedTuple):
    psd: bool
    min_eigenvalue: float
    max_eigenvalue: float


def as_nodes(nodes):
    """Coerce a node list to a 2-D float array (``(n, 1)`` for index nodes)."""
    arr = np.asarray(nodes, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError("nodes must be a list of points")
    return arr


def min_spacing(nodes):
    """Smallest positive distance between distinct nodes."""
    pts = np.unique(as_nodes(nodes), axis=0)
    if len(pts) < 2:
        raise KernelError("spacing is undefined for fewer than two distinct nodes")
    return float(pdist(pts).min())


def _check_domain(k, pts):
    if k.is_custom:
        idx = pts[:, 0]
        n = k.matrix.shape[0]
        if pts.shape[1] != 1 or np.any(idx != np.round(idx)) or np.any(idx < 0) or np.any(idx >= n):
            raise DomainError(f"custom kernel nodes must be integer indices in [0, {n})")
        return
    if pts.shape[1] != k.dim:
        raise DomainError(f"nodes have dimension {pts.shape[1]}, kernel expects {k.dim}")
    if k.family == "log_unit_ball" and np.any(np.linalg.norm(pts, axis=1) >= 1.0):
        raise DomainError("log_unit_ball nodes must lie strictly inside the unit disk")


def _require_symmetric(m):
    scale = max(1.0, float(np.abs(m).max()))
    if np.abs(m - m.T).max() > 1e-12 * scale:
        raise NotSymmetric("matrix is not symmetric")


def kernel_eval(k: Kernel, x, y) -> float:
    """Evaluate the kernel at a single pair of nodes."""
    if k.is_custom:
        px, py = as_nodes(x), as_nodes(y)
    else:
        px, py = np.atleast_2d(np.asarray(x, dtype=float)), np.atleast_2d(np.asarray(y, dtype=float))
    if len(px) != 1 or len(py) != 1:
        raise ValueError("kernel_eval takes single nodes")
    _check_domain(k, px)
    _check_domain(k, py)
    if k.is_custom:
        i, j = int(px[0, 0]), int(py[0, 0])
        if i == j and isinstance(k.diagonal, ExcludeDiagonal):
            raise CoincidentNodes(f"node {i} coincides with itself under ExcludeDiagonal")
        if i == j and isinstance(k.diagonal, Explicit):
            return k.diagonal_value()
        return float(k.matrix[i, j])
    d = float(np.linalg.norm(px[0] - py[0]))
    if d > 0:
        return float(k.off_diagonal(d))
    if isinstance(k.diagonal, ExcludeDiagonal):
        raise CoincidentNodes("coincident nodes under ExcludeDiagonal")
    return k.diagonal_value()


def pair_values(k: Kernel, rows, cols, diag_rows=None):
    """Dense kernel values with the diagonal policy applied on coincident pairs.

    ``k`` must already be bound when it uses ``EffectiveRadius``.
    ``diag_rows`` supplies per-row values for an array-valued ``Explicit``.
    """
    rows, cols = as_nodes(rows), as_nodes(cols)
    _check_domain(k, rows)
    _check_domain(k, cols)
    if k.is_custom:
        ri = rows[:, 0].astype(int)
        ci = cols[:, 0].astype(int)
        out = k.matrix[np.ix_(ri, ci)].copy()
        same = ri[:, None] == ci[None, :]
    else:
        dist = cdist(rows, cols)
        same = dist == 0
        with np.errstate(divide="ignore"):
            out = k.off_diagonal(np.where(same, 1.0, dist))
    if not same.any():
        return out
    policy = k.diagonal
    if isinstance(policy, ExcludeDiagonal):
        raise CoincidentNodes("coincident nodes under ExcludeDiagonal")
    if k.is_custom and not isinstance(policy, Explicit):
        return out
    if isinstance(policy, Explicit) and np.ndim(policy.values) > 0:
        vals = np.asarray(policy.values if diag_rows is None else diag_rows, dtype=float)
        if len(vals) != len(rows):
            raise KernelError("explicit diagonal values must align with the row nodes")
        out = np.where(same, vals[:, None], out)
    else:
        out[same] = k.diagonal_value()
    return out


def assemble_gram(k: Kernel, nodes_row, nodes_col, rows=None, cols=None) -> GramBlock:
    """Tabulate the kernel between two node lists.

    An unbound ``EffectiveRadius`` is resolved from the spacing of ``nodes_row``.
    """
    r, c = as_nodes(nodes_row), as_nodes(nodes_col)
    if len(r) == 0 or len(c) == 0:
        raise ValueError("node lists must be nonempty")
    kb = k.bind(r, extra=c)
    values = pair_values(kb, r, c)
    if not np.all(np.isfinite(values)):
        raise KernelError("Gram block has non-finite entries")
    values.setflags(write=False)
    return GramBlock(rows, cols, values)


def check_positive_definite(g, tol: float = 1e-8) -> PSDResult:
    """Eigenvalue test ``min_eig >= -tol * max(1, |max_eig|)``."""
    a = np.asarray(g.values if isinstance(g, GramBlock) else g, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("Gram matrix must be square")
    _require_symmetric(a)
    ev = np.linalg.eigvalsh(0.5 * (a + a.T))
    lo, hi = float(ev[0]), float(ev[-1])
    return PSDResult(lo >= -tol * max(1.0, abs(hi)), lo, hi)

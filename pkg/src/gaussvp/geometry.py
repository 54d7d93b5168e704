"""Node sets for experiments: sphere discretizations and planar grids."""
from __future__ import annotations

import logging

import numpy as np

log = logging.getLogger(__name__)

GOLDEN_ANGLE = np.pi * (1.0 + np.sqrt(5.0))


def fibonacci_sphere(n: int) -> np.ndarray:
    """``n`` nearly uniform points on the unit sphere in R^3."""
    if n < 2:
        raise ValueError("need at least two points")
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    phi = GOLDEN_ANGLE * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _tangent_basis(x):
    ref = np.where(np.abs(x[:, 2:3]) < 0.9, [[0.0, 0.0, 1.0]], [[1.0, 0.0, 0.0]])
    e1 = np.cross(x, ref)
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    return e1, np.cross(x, e1)


def newtonian_row_sums(x: np.ndarray) -> np.ndarray:
    """``sum_{q != p} 1/|x_p - x_q|`` for every point ``p``."""
    d = x[:, None, :] - x[None, :, :]
    r = np.sqrt((d ** 2).sum(-1))
    np.fill_diagonal(r, np.inf)
    return (1.0 / r).sum(1)


def balanced_sphere(n: int, tol: float = 1e-13, max_iter: int = 30) -> np.ndarray:
    """Points on the unit sphere with equal Newtonian row sums.

    Starts from the Fibonacci lattice and runs Gauss-Newton in tangent
    coordinates.  With equal row sums (and a constant Gram diagonal) the
    Newtonian Gram matrix has the all-ones vector as an eigenvector, so the
    discrete equilibrium measure is exactly uniform.  Convergence is
    quadratic; a handful of iterations reach ``tol``.
    """
    x = fibonacci_sphere(n)
    idx = np.arange(n)
    for it in range(max_iter):
        d = x[:, None, :] - x[None, :, :]
        r = np.sqrt((d ** 2).sum(-1))
        np.fill_diagonal(r, np.inf)
        inv = 1.0 / r
        s = inv.sum(1)
        res = s - s.mean()
        spread = np.abs(res).max() / s.mean()
        log.debug("balance iter %d relative spread %.3e", it, spread)
        if spread <= tol:
            break
        # G[p, q] = gradient of 1/|x_p - x_q| with respect to x_p
        G = -d * inv[..., None] ** 3
        e1, e2 = _tangent_basis(x)
        J1 = -(G * e1[None, :, :]).sum(-1)
        J2 = -(G * e2[None, :, :]).sum(-1)
        J1[idx, idx] = (G * e1[:, None, :]).sum(-1).sum(1)
        J2[idx, idx] = (G * e2[:, None, :]).sum(-1).sum(1)
        J = np.hstack([J1, J2])
        J -= J.mean(0)
        step = np.linalg.lstsq(J, -res, rcond=None)[0]
        x = x + step[:n, None] * e1 + step[n:, None] * e2
        x /= np.linalg.norm(x, axis=1)[:, None]
    else:
        log.warning("balanced_sphere(%d) stopped with relative spread %.3e", n, spread)
    return x


def grid_plate(nx: int, ny: int, spacing: float = 0.1, z: float = 0.0) -> np.ndarray:
    """``nx * ny`` points of a square grid in the plane ``z`` of R^3, centred at the origin."""
    u = (np.arange(nx) - (nx - 1) / 2) * spacing
    v = (np.arange(ny) - (ny - 1) / 2) * spacing
    U, V = np.meshgrid(u, v, indexing="ij")
    return np.column_stack([U.ravel(), V.ravel(), np.full(U.size, float(z))])

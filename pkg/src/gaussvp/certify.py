"""Optimality certificates for equilibrium measures, and discrete capacities.

"Nearly everywhere" is checked at every node: a single regularized node has
positive discrete capacity, so no node may be skipped.  Residuals are signed
and compared against ``tol * scale`` with
``scale = max(1, |C_i|, max_x |a_i W_i(x)|)`` per plate.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .condenser import Condenser, CrossSup, Plate, check_cross_sup
from .errors import DegenerateGram, InfeasibleInput
from .kernel import Kernel, check_positive_definite
from .measure import (DiscreteVectorMeasure, ExternalField, field_pairing, field_values, pairing, r_map,
                      semimetric_distance, weighted_energy, weighted_potentials)
from .solver import SolverConfig, solve, support_thresholds


class PlateCertificate(NamedTuple):
    lower_ok: bool
    lower_residual: float
    lower_node: int
    support_upper_ok: bool
    support_upper_residual: float
    support_upper_node: int
    complementarity_ok: bool
    complementarity_residual: float
    constant_inner: float
    constant_inf: float
    discrepancy: float
    scale: float


@dataclass
class CertificateResult:
    plates: list
    value: float
    value_identity_residual: float
    value_identity_ok: bool
    cross_sup: CrossSup
    tol: float
    eta: list | None = None

    @property
    def lower_ok(self):
        return [p.lower_ok for p in self.plates]

    @property
    def support_upper_ok(self):
        return [p.support_upper_ok for p in self.plates]

    @property
    def complementarity_ok(self):
        return [p.complementarity_ok for p in self.plates]

    @property
    def constants(self):
        return np.array([p.constant_inner for p in self.plates])

    @property
    def ok(self):
        return self.value_identity_ok and all(
            p.lower_ok and p.support_upper_ok and p.complementarity_ok for p in self.plates)

    def worst(self):
        """(plate, node, residual) of the most negative lower residual."""
        i = int(np.argmin([p.lower_residual / p.scale for p in self.plates]))
        return i, self.plates[i].lower_node, self.plates[i].lower_residual


def _check_feasible(c, mu, fv, feas_tol):
    for i, (p, w, v) in enumerate(zip(c.plates, mu.weights, fv)):
        if abs(p.g @ w - p.mass) > feas_tol * p.mass:
            raise InfeasibleInput(f"plate {i}: g-mass {p.g @ w!r} differs from {p.mass!r}")
        if np.any((w > 0) & np.isinf(v)):
            raise InfeasibleInput(f"plate {i}: weight on a node where the field is +inf")


def certify_equilibrium(k: Kernel, c: Condenser, f, lam: DiscreteVectorMeasure, tol: float = 1e-6,
                        support_threshold: float | None = None, eta=None,
                        feas_tol: float = 1e-8) -> CertificateResult:
    """Check the variational inequalities and the constant identities at ``lam``."""
    fv = field_values(f, k, c)
    _check_feasible(c, lam, fv, feas_tol)
    Ws = weighted_potentials(k, lam, f)
    thr = support_thresholds(c, support_threshold)
    plates = []
    for p, W, w, t in zip(c.plates, Ws, lam.weights, thr):
        C = pairing(W, w)
        aW = p.mass * W
        fin = np.isfinite(aW)
        res = np.where(fin, aW - C * p.g, np.inf)
        scale = max(1.0, abs(C), float(np.abs(aW[fin]).max()) if fin.any() else 0.0)
        lo_node = int(np.argmin(res))
        sup = np.flatnonzero(w > t)
        if len(sup):
            up_node = int(sup[np.argmax(res[sup])])
            up_res = float(res[up_node])
            comp = float(np.abs(res[sup]).max())
        else:
            up_node, up_res, comp = -1, -math.inf, 0.0
        c_inf = float(np.min(aW[fin] / p.g[fin]))
        plates.append(PlateCertificate(
            bool(res[lo_node] >= -tol * scale), float(res[lo_node]), lo_node,
            bool(up_res <= tol * scale), up_res, up_node,
            bool(comp <= tol * scale), comp,
            C, c_inf, C - c_inf, scale))
    value = weighted_energy(k, lam, f)
    vid = abs(value - sum(pc.constant_inner for pc in plates) - field_pairing(k, lam, f))
    return CertificateResult(plates, value, vid, bool(vid <= max(tol, 1e-8) * (1.0 + abs(value))),
                             check_cross_sup(c, k), tol, None if eta is None else list(eta))


class EtaCertificate(NamedTuple):
    side_a_ok: bool
    side_b_ok: bool
    lower_ok: bool
    value_upper_ok: bool
    support_upper_ok: bool
    value_lower_ok: bool
    eta_matches: bool
    eta_discrepancy: np.ndarray
    certified: bool


def check_eta_certificate(k: Kernel, c: Condenser, f, mu: DiscreteVectorMeasure, eta, value_bound=None,
                          tol: float = 1e-6, support_threshold: float | None = None) -> EtaCertificate:
    """Certify ``mu`` from externally supplied constants ``eta``.

    Side A: ``a_i W_i >= eta_i g_i`` at every node and
    ``G_f(mu) <= sum(eta) + <f, mu>``.
    Side B: ``a_i W_i <= eta_i g_i`` on the support and
    ``value_bound >= sum(eta) + <f, mu>``.  Side B is never satisfied
    without a ``value_bound``.
    """
    eta = np.asarray(eta, dtype=float)
    fv = field_values(f, k, c)
    _check_feasible(c, mu, fv, 1e-8)
    Ws = weighted_potentials(k, mu, f)
    thr = support_thresholds(c, support_threshold)
    value = weighted_energy(k, mu, f)
    fp = field_pairing(k, mu, f)
    vscale = tol
    lower = upper = True
    consts = []
    for p, W, w, t, e in zip(c.plates, Ws, mu.weights, thr, eta):
        aW = p.mass * W
        fin = np.isfinite(aW)
        scale = max(1.0, abs(e), float(np.abs(aW[fin]).max()) if fin.any() else 0.0)
        res = np.where(fin, aW - e * p.g, np.inf)
        lower &= bool(res.min() >= -tol * scale)
        sup = w > t
        upper &= bool(not sup.any() or res[sup].max() <= tol * scale)
        consts.append((pairing(W, w), scale))
    value_upper = bool(value <= eta.sum() + fp + vscale)
    value_lower = value_bound is not None and bool(value_bound >= eta.sum() + fp - vscale)
    side_a = lower and value_upper
    side_b = upper and value_lower
    disc = np.array([e - C for e, (C, _) in zip(eta, consts)])
    matches = bool(all(abs(d) <= tol * s for d, (_, s) in zip(disc, consts)))
    return EtaCertificate(side_a, side_b, lower, value_upper, upper, value_lower, matches, disc,
                          (side_a or side_b) and matches)


class PairResiduals(NamedTuple):
    first: int
    second: int
    distance: float
    field_pairing: float
    potential: float
    constants: float
    r_image: float | None


class UniquenessReport(NamedTuple):
    pairs: list
    ok: bool
    strictly_pd: bool
    max_residual: float


def _strictly_pd(k, c, rel=1e-10):
    pts, first = np.unique(c.nodes, axis=0, return_index=True)
    K = c.gram(k)[np.ix_(first, first)]
    ev = np.linalg.eigvalsh(K)
    return bool(ev[0] > rel * max(1.0, abs(ev[-1])))


def uniqueness_battery(k: Kernel, c: Condenser, f, lambdas, tol: float = 1e-5) -> UniquenessReport:
    """Pairwise consistency of several (supposed) equilibrium measures."""
    if len(lambdas) < 2:
        raise ValueError("need at least two measures")
    strict = _strictly_pd(k, c)
    Ws = [np.concatenate(weighted_potentials(k, lam, f)) for lam in lambdas]
    fps = [field_pairing(k, lam, f) for lam in lambdas]
    consts = [np.array([pairing(W, w) for W, w in zip(weighted_potentials(k, lam, f), lam.weights)])
              for lam in lambdas]
    pairs = []
    for a, b in itertools.combinations(range(len(lambdas)), 2):
        fin = np.isfinite(Ws[a]) & np.isfinite(Ws[b])
        pot = float(np.abs(Ws[a][fin] - Ws[b][fin]).max()) if fin.any() else 0.0
        rdiff = None
        if strict:
            d = r_map(lambdas[a]) - r_map(lambdas[b])
            rdiff = float(np.abs(d.weights).max()) if len(d) else 0.0
        pairs.append(PairResiduals(a, b, semimetric_distance(k, lambdas[a], lambdas[b]),
                                   abs(fps[a] - fps[b]), pot, float(np.abs(consts[a] - consts[b]).max()), rdiff))
    worst = max(max(p.distance, p.field_pairing, p.potential, p.constants, p.r_image or 0.0) for p in pairs)
    return UniquenessReport(pairs, worst <= tol, strict, worst)


class CapacityResult(NamedTuple):
    capacity: float
    theta: np.ndarray
    robin_constant: float
    omega: np.ndarray
    energy: float
    mass_norm_residual: float
    min_potential: float
    invariants_ok: bool


def scalar_equilibrium(k: Kernel, nodes, tol: float = 1e-12) -> CapacityResult:
    """Equilibrium measure and capacity of a node set.

    Minimizes the energy over probability measures on the nodes; the capacity
    is the reciprocal of the minimal energy and ``theta = capacity * omega``.
    """
    c = Condenser([Plate(1, nodes, 1.0, 1.0)])
    K = c.gram(k)
    psd = check_positive_definite(K)
    if not psd.min_eigenvalue > 1e-12 * max(1.0, abs(psd.max_eigenvalue)):
        raise DegenerateGram(f"Gram matrix is not strictly positive definite (min eigenvalue {psd.min_eigenvalue:.3e})")
    rep = solve(k, c, ExternalField.zero(), SolverConfig(gap_tol_abs=tol, gap_tol_rel=tol))
    omega = rep.lam.weights[0]
    en = float(omega @ K @ omega)
    cap = 1.0 / en
    theta = cap * omega
    mass, norm2 = float(theta.sum()), float(theta @ K @ theta)
    resid = max(abs(mass - cap), abs(norm2 - cap)) / cap
    min_pot = float((K @ theta).min())
    ok = resid <= 1e-8 and min_pot >= 1.0 - 1e-6
    return CapacityResult(cap, theta, 1.0 / cap, omega, en, resid, min_pot, ok)

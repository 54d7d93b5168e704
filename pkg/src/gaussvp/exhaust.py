"""Exhaustion of a condenser by nested sub-condensers.

Every sub-problem is solved with the kernel bound to the *full* condenser, so
all steps share one Gram diagonal and their measures embed isometrically
into the full problem.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .condenser import Condenser, ExhaustionSchedule
from .errors import StepInfeasible, ZeroRestrictedMass
from .kernel import Kernel
from .measure import DiscreteVectorMeasure, field_pairing, field_values, semimetric_distance
from .solver import EquilibriumReport, SolverConfig, solve


@dataclass
class ExhaustionStep:
    step: int
    sizes: tuple
    value: float
    gap: float
    constants: np.ndarray
    distance_to_final: float
    field_pairing: float
    support_sizes: tuple
    lam: DiscreteVectorMeasure


@dataclass
class ExhaustionReport:
    steps: list
    full: EquilibriumReport
    monotone_ok: bool
    converged: bool
    final_distance: float
    final_pairing_residual: float
    final_constant_residual: float
    final_value_residual: float
    tol: float

    @property
    def values(self):
        return np.array([s.value for s in self.steps])

    @property
    def distances(self):
        return np.array([s.distance_to_final for s in self.steps])


def _embed(c: Condenser, subsets, weights) -> DiscreteVectorMeasure:
    out = []
    for p, idx, w in zip(c.plates, subsets, weights):
        full = np.zeros(p.n)
        full[np.asarray(idx, dtype=int)] = w
        out.append(full)
    return DiscreteVectorMeasure(c, tuple(out))


def run_exhaustion(k: Kernel, c: Condenser, f, schedule: ExhaustionSchedule, cfg: SolverConfig | None = None,
                   tol: float = 1e-5, workers: int = 1) -> ExhaustionReport:
    """Solve on every step of ``schedule`` and compare with the full solve.

    Values must not increase along the steps (up to ``1e-9 * scale``); the
    final step is compared with the full problem at ``tol``.  Intermediate
    distances are reported, not asserted.
    """
    cfg = cfg or SolverConfig()
    kb = c.bind(k)
    fv = field_values(f, kb, c)
    full = solve(kb, c, fv, cfg)
    lam_a = full.lam
    pair_a = field_pairing(kb, lam_a, fv)

    subs = []
    for m, subsets in enumerate(schedule.steps):
        sub_f = []
        for i, (v, idx) in enumerate(zip(fv, subsets)):
            vi = v[np.asarray(idx, dtype=int)]
            if len(vi) == 0 or not np.isfinite(vi).any():
                raise StepInfeasible(m, f"plate {i} has no node with a finite field")
            sub_f.append(vi)
        subs.append((c.restrict(subsets), sub_f))

    def one(item):
        sc, sf = item
        return solve(kb, sc, sf, cfg)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            reports = list(ex.map(one, subs))
    else:
        reports = [one(s) for s in subs]

    steps = []
    for m, (subsets, rep) in enumerate(zip(schedule.steps, reports)):
        emb = _embed(c, subsets, rep.lam.weights)
        steps.append(ExhaustionStep(
            m, tuple(len(s) for s in subsets), rep.value, rep.gap, np.asarray(rep.constants),
            semimetric_distance(kb, emb, lam_a), field_pairing(kb, emb, fv),
            tuple(len(s) for s in rep.support), emb))

    values = np.array([s.value for s in steps])
    scale = max(1.0, float(np.abs(values).max()))
    monotone = bool(np.all(np.diff(values) <= 1e-9 * scale))
    last = steps[-1]
    d_fin = last.distance_to_final
    p_res = abs(last.field_pairing - pair_a)
    c_res = float(np.abs(last.constants - full.constants).max())
    v_res = abs(last.value - full.value)
    converged = d_fin <= tol and p_res <= tol and c_res <= tol and v_res <= tol * max(1.0, abs(full.value))
    return ExhaustionReport(steps, full, monotone, bool(converged), d_fin, p_res, c_res, v_res, tol)


def renormalize_restriction(c: Condenser, mu: DiscreteVectorMeasure, subset) -> DiscreteVectorMeasure:
    """Restrict ``mu`` to ``subset`` and rescale each plate back to its mass ``a_i``.

    The result lives on ``c.restrict(subset)``.
    """
    sub = c.restrict(subset)
    out = []
    for i, (p, w, idx) in enumerate(zip(c.plates, mu.weights, subset)):
        idx = np.asarray(idx, dtype=int)
        wi = w[idx]
        m = float(p.g[idx] @ wi)
        if not m > 0 or not math.isfinite(m):
            raise ZeroRestrictedMass(i)
        out.append(wi * (p.mass / m))
    return DiscreteVectorMeasure(sub, tuple(out))

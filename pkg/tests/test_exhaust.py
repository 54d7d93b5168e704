import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import K2, random_feasible, random_point_instance
from gaussvp import (Condenser, DiscreteVectorMeasure, ExternalField, Kernel, Plate, make_exhaustion,
                     renormalize_restriction, run_exhaustion, solve, weighted_energy)
from gaussvp.condenser import ExhaustionSchedule
from gaussvp.errors import StepInfeasible, ZeroRestrictedMass


def test_single_step(ex_b):
    k, c, f = ex_b
    rep = run_exhaustion(k, c, f, make_exhaustion(c, 1))
    assert len(rep.steps) == 1 and rep.monotone_ok and rep.converged
    assert rep.steps[0].value == pytest.approx(2.0)


def test_three_symmetric_nodes():
    k = Kernel.riesz(1, 2)
    pts = [(np.cos(t), np.sin(t)) for t in 2 * np.pi * np.arange(3) / 3]
    c = Condenser([Plate(1, pts, 1.0, 1.0)])
    rep = run_exhaustion(k, c, ExternalField.zero(), make_exhaustion(c, 3))
    assert [s.sizes for s in rep.steps] == [(1,), (2,), (3,)]
    assert rep.monotone_ok and np.all(np.diff(rep.values) <= 0)
    assert rep.converged and rep.final_distance <= 1e-9


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2 ** 20), order=st.sampled_from(["index", "centroid"]))
def test_final_step_matches_full_solve(seed, order):
    rng = np.random.default_rng(seed)
    k, c, f = random_point_instance(rng)
    rep = run_exhaustion(k, c, f, make_exhaustion(c, 4, order))
    assert rep.monotone_ok and rep.converged
    assert rep.final_distance <= 1e-6
    assert rep.full.value == pytest.approx(solve(k, c, f).value, rel=1e-12)


def test_parallel_steps_match_serial():
    rng = np.random.default_rng(4)
    k, c, f = random_point_instance(rng)
    s = make_exhaustion(c, 4)
    a = run_exhaustion(k, c, f, s)
    b = run_exhaustion(k, c, f, s, workers=4)
    np.testing.assert_array_equal(a.values, b.values)


def test_step_infeasible():
    c = Condenser([Plate(1, [0, 1], 1.0, 1.0)])
    f = ExternalField.tabulated([[np.inf, 0.0]])
    with pytest.raises(StepInfeasible) as ei:
        run_exhaustion(Kernel.custom(K2), c, f, make_exhaustion(c, 2))
    assert ei.value.step == 0


def test_renormalize_examples():
    c = Condenser([Plate(1, [0, 1], 1.0, 1.0)])
    mu = DiscreteVectorMeasure(c, ([0.5, 0.5],))
    full = renormalize_restriction(c, mu, [np.arange(2)])
    np.testing.assert_array_equal(full.weights[0], [0.5, 0.5])
    one = renormalize_restriction(c, mu, [np.array([0])])
    np.testing.assert_array_equal(one.weights[0], [1.0])
    with pytest.raises(ZeroRestrictedMass) as ei:
        renormalize_restriction(c, DiscreteVectorMeasure(c, ([1.0, 0.0],)), [np.array([1])])
    assert ei.value.plate == 0


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 20))
def test_bridge_inequality(seed):
    rng = np.random.default_rng(seed)
    k, c, f = random_point_instance(rng, field=False)
    kb = c.bind(k)
    sched = make_exhaustion(c, 3, "centroid")
    rep = run_exhaustion(k, c, f, sched)
    mu = random_feasible(rng, c)
    for step, subsets in zip(rep.steps, sched.steps):
        sub = renormalize_restriction(c, mu, subsets)
        fz = ExternalField.tabulated([np.zeros(len(s)) for s in subsets])
        assert weighted_energy(kb, sub, fz) >= step.value - 1e-9


def test_schedule_nesting_reported():
    s = ExhaustionSchedule(((np.array([0, 1]),), (np.array([1]),)))
    assert not s.is_nested()

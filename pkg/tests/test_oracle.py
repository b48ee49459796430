from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import DESK, base_doc, highs_value, random_case_doc, tiny_case
from flexgauge.casefile import case_from_dict, load_case
from flexgauge.compact import assemble
from flexgauge.errors import BaseInfeasibleError
from flexgauge.model import ScaleVector
from flexgauge.oracle import (EnumerationGuardError, brute_force_eta, lambda_grid,
                              min_slack_dual_program, min_slack_lp, min_slack_program,
                              reference_flexibility, worst_case_eta)
from flexgauge.solver import solve_lp

D1 = load_case(DESK[0])
CF1 = assemble(D1)
U1 = D1.uncertainty


def eta_at(vec):
    return worst_case_eta(CF1, U1, ScaleVector.from_array(vec, U1.n_buses, U1.n_sub))[0]


def test_zero_scale_equals_nominal_min_slack():
    assert eta_at(np.zeros(U1.dim)) == pytest.approx(min_slack_lp(CF1, U1.d_bar, U1.delta_d_bar),
                                                     abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(s1=st.floats(0, 1), s2=st.floats(0, 1), seed=st.integers(0, 2**32 - 1))
def test_monotone_along_rays(s1, s2, seed):
    w = np.random.default_rng(seed).uniform(0, 1, U1.dim)
    lo, hi = sorted((s1, s2))
    assert eta_at(lo * w) <= eta_at(hi * w) + 1e-9


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_midpoint_convex(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(0, 1, (2, U1.dim))
    assert eta_at(0.5 * (a + b)) <= 0.5 * (eta_at(a) + eta_at(b)) + 1e-9


def test_gray_walk_matches_cold_enumeration():
    rng = np.random.default_rng(2)
    for _ in range(3):
        lam = ScaleVector.from_array(rng.uniform(0, 1, U1.dim), U1.n_buses, U1.n_sub)
        assert worst_case_eta(CF1, U1, lam)[0] == pytest.approx(brute_force_eta(CF1, U1, lam),
                                                                abs=1e-9)


def test_vertex_value_matches_highs():
    lam = ScaleVector.full(U1.n_buses, U1.n_sub)
    eta, arg = worst_case_eta(CF1, U1, lam)
    d, dd = U1.realization(lam, arg.up_b, arg.up_t)
    assert eta == pytest.approx(highs_value(min_slack_program(CF1, d, dd)), abs=1e-7)


@pytest.mark.parametrize("seed", range(6))
def test_min_slack_equals_explicit_dual(seed):
    rng = np.random.default_rng(50 + seed)
    case = case_from_dict(random_case_doc(rng, 2, 2, 1, 2))
    cf = assemble(case)
    u = case.uncertainty
    d = u.d_bar + rng.uniform(-1, 1, u.n_buses) * u.d_hat
    dd = rng.uniform(-1, 1, u.n_sub) * u.delta_d_hat
    primal = min_slack_lp(cf, d, dd)
    dual = solve_lp(min_slack_dual_program(cf, d, dd))
    assert dual.optimal
    assert primal == pytest.approx(dual.objective, abs=1e-6)
    assert primal == pytest.approx(highs_value(min_slack_program(cf, d, dd)), abs=1e-6)


def test_dead_dimensions_collapse():
    lam = ScaleVector.zeros(U1.n_buses, U1.n_sub)
    _, arg = worst_case_eta(CF1, U1, lam)
    assert all(arg.up_b) and all(arg.up_t)


def test_enumeration_guard():
    case = tiny_case(T=20)
    cf = assemble(case)
    u = case.uncertainty
    with pytest.raises(EnumerationGuardError):
        worst_case_eta(cf, u, ScaleVector.zeros(1, 20))


def test_dimension_check():
    with pytest.raises(ValueError):
        worst_case_eta(CF1, U1, ScaleVector.zeros(U1.n_buses + 1, U1.n_sub))
    with pytest.raises(ValueError):
        min_slack_lp(CF1, U1.d_bar[:1], U1.delta_d_bar)


def test_lambda_grid():
    pts = lambda_grid(4, 0.5)
    assert len(pts) == 3 + 4 * 2
    assert np.array_equal(pts[-1], [0, 0, 0, 1.0])
    with pytest.raises(ValueError):
        lambda_grid(4, 0.0)


def test_reference_flexibility_bounds():
    s, flex = reference_flexibility(D1, np.ones(U1.dim), CF1)
    assert 0.0 <= s <= 1.0
    assert eta_at(s * np.ones(U1.dim)) <= 1e-6
    if s < 1.0:
        assert eta_at(min(1.0, s + 1e-4) * np.ones(U1.dim)) > 1e-6
    assert flex == pytest.approx(s * U1.d_hat.sum() * 2 + s * U1.delta_d_hat.sum() * 2)


def test_reference_flexibility_base_infeasible():
    case = replace(D1, budget=0.5 * D1.budget)
    with pytest.raises(BaseInfeasibleError):
        reference_flexibility(case, np.ones(U1.dim))


def test_reference_flexibility_weight_checks():
    with pytest.raises(ValueError):
        reference_flexibility(D1, np.ones(U1.dim + 1), CF1)
    with pytest.raises(ValueError):
        reference_flexibility(D1, 2 * np.ones(U1.dim), CF1)


def test_infeasible_nominal_gives_positive_value():
    doc = base_doc(loads=(200.0,))  # single 150 MW unit
    case = case_from_dict(doc)
    cf = assemble(case)
    assert min_slack_lp(cf, case.uncertainty.d_bar, case.uncertainty.delta_d_bar) == \
        pytest.approx(50.0, abs=1e-9)

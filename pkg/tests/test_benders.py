import itertools
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import DESK, highs_lp, random_case_doc, tiny_case
from flexgauge.benders import (BendersOptions, CutRecord, MasterProblem, build_rdfea, cut_from_duals,
                               nominal_dispatch_cost, run_benders, solve_master, solve_rdfea)
from flexgauge.casefile import case_from_dict, load_case
from flexgauge.compact import assemble
from flexgauge.errors import BaseInfeasibleError, IterationLimitError
from flexgauge.model import ScaleVector
from flexgauge.oracle import min_slack_dual_program, worst_case_eta

D1 = load_case(DESK[0])
CF1 = assemble(D1)
U1 = D1.uncertainty


def cut(coef, const=0.0):
    return CutRecord(np.asarray(coef, float), const, 1, 1.0)


def test_master_without_cuts_is_unit_box():
    lam, obj = solve_master(MasterProblem(np.array([10.0, 10.0, 2.0, 2.0])))
    assert np.allclose(lam, 1.0) and obj == pytest.approx(24.0)


def test_master_single_cut():
    mp = MasterProblem(np.array([10.0, 10.0]))
    mp.add_cut(cut([1.0, 0.0], -0.5))
    lam, obj = solve_master(mp)
    assert obj == pytest.approx(15.0) and lam[0] == pytest.approx(0.5)


def test_master_shared_cut_gives_one_deviation():
    mp = MasterProblem(np.array([10.0, 10.0]))
    mp.add_cut(cut([1.0, 1.0], -1.0))
    assert solve_master(mp)[1] == pytest.approx(10.0)


def test_master_rejects_wrong_dimension():
    with pytest.raises(ValueError):
        MasterProblem(np.ones(2)).add_cut(cut([1.0, 1.0, 1.0]))


def test_zero_scale_has_no_bilinear_terms():
    zero = ScaleVector.zeros(U1.n_buses, U1.n_sub)
    p = build_rdfea(CF1, U1, zero)
    assert p.lp.n_cols == p.aux_start
    full = build_rdfea(CF1, U1, zero, full_envelope=True)
    assert np.all(full.lp.c[full.aux_start:] == 0.0)


def test_binary_count_one_bus():
    for T in (1, 3):
        case = tiny_case(T=T)
        p = build_rdfea(assemble(case), case.uncertainty, ScaleVector.full(1, T, 0.5))
        assert p.n_binaries == 2 + 2 * T


@pytest.mark.parametrize("seed", range(4))
def test_compact_and_full_envelopes_agree(seed):
    rng = np.random.default_rng(seed)
    lam = ScaleVector.from_array(rng.uniform(0, 1, U1.dim), U1.n_buses, U1.n_sub)
    a = solve_rdfea(build_rdfea(CF1, U1, lam)).eta
    b = solve_rdfea(build_rdfea(CF1, U1, lam, full_envelope=True)).eta
    assert a == pytest.approx(b, abs=1e-8)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_subproblem_value_nonnegative_and_cut_exact(seed):
    rng = np.random.default_rng(seed)
    lam = ScaleVector.from_array(rng.uniform(0, 1, U1.dim), U1.n_buses, U1.n_sub)
    sol = solve_rdfea(build_rdfea(CF1, U1, lam))
    assert sol.eta >= 0.0
    if sol.eta > 1e-9:
        c = cut_from_duals(CF1, U1, sol)
        assert c.evaluate(lam) == pytest.approx(sol.eta, abs=1e-7)
        assert c.evaluate(np.zeros(U1.dim)) == pytest.approx(c.constant)
        # valid: never exceeds the true worst case anywhere in the box
        other = ScaleVector.from_array(rng.uniform(0, 1, U1.dim), U1.n_buses, U1.n_sub)
        assert c.evaluate(other) <= worst_case_eta(CF1, U1, other)[0] + 1e-7


def test_cut_needs_positive_value():
    sol = solve_rdfea(build_rdfea(CF1, U1, ScaleVector.zeros(U1.n_buses, U1.n_sub)))
    with pytest.raises(ValueError):
        cut_from_duals(CF1, U1, sol)


def _vertex_enumeration(cf, u, lam):
    """Max over z vertices of the dual objective, each an LP solved by HiGHS."""
    best = -np.inf
    for bits in itertools.product((True, False), repeat=u.n_buses + u.n_sub):
        d, dd = u.realization(lam, bits[:u.n_buses], bits[u.n_buses:])
        lp = min_slack_dual_program(cf, d, dd)
        best = max(best, highs_lp(lp.c, lp.A, lp.senses, lp.b, lp.lb, lp.ub, maximize=True))
    return best


@pytest.mark.parametrize("seed", range(3))
def test_milp_equals_vertex_enumeration(seed):
    rng = np.random.default_rng(300 + seed)
    case = case_from_dict(random_case_doc(rng, 2, 2, 1, 2))
    cf = assemble(case)
    u = case.uncertainty
    lam = ScaleVector.from_array(rng.uniform(0, 1, u.dim), u.n_buses, u.n_sub)
    p = build_rdfea(cf, u, lam)
    assert p.n_binaries <= 8
    assert solve_rdfea(p).eta == pytest.approx(_vertex_enumeration(cf, u, lam), abs=1e-8)


def test_run_benders_desk_case():
    rep = run_benders(D1)
    eta, _ = worst_case_eta(CF1, U1, rep.lambda_star)
    assert eta <= 1e-6
    objs = [r["master_objective"] for r in rep.trace]
    assert all(b <= a + 1e-9 for a, b in zip(objs, objs[1:]))
    assert rep.trace[-1]["eta"] <= 1e-6
    assert rep.tf == pytest.approx(objs[-1], abs=1e-9)
    assert len(rep.cuts) == rep.iterations - 1


def test_budget_below_nominal_is_base_infeasible():
    case = replace(D1, budget=0.9 * nominal_dispatch_cost(D1))
    with pytest.raises(BaseInfeasibleError) as info:
        run_benders(case)
    assert info.value.eta > 0


def test_generous_single_bus_reaches_full_box():
    case = tiny_case(T=1)
    rep = run_benders(case)
    assert np.allclose(rep.lambda_star.as_array(), 1.0)
    assert rep.iterations == 1


def test_iteration_limit_carries_report():
    with pytest.raises(IterationLimitError) as info:
        run_benders(D1, BendersOptions(max_iters=1))
    assert info.value.iterations == 1
    assert info.value.report is not None and len(info.value.report.cuts) == 1


def test_invalid_case_rejected():
    bad = replace(D1, budget=-5.0)
    with pytest.raises(ValueError, match="budget"):
        run_benders(bad)


def test_nominal_cost_single_unit():
    # one 150 MW unit at 20 $/MW serving 100 MW
    assert nominal_dispatch_cost(tiny_case()) == pytest.approx(2000.0)

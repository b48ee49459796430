import math
from dataclasses import replace

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from flexgauge.agc import (RHO_PLAUSIBLE, ContinuousAgcModel, DimensionError, continuous_matrices,
                           matrix_exponential, pass_through, zoh, zoh_discretize)


def model(dt=4.0, T=3, g=2):
    return ContinuousAgcModel(t_ch=[5.0, 6.0][:g], t_g=[2.0, 2.0][:g], droop=[1.0, 1.6][:g],
                              inertia=30.0, damping=2.0, dt=dt, n_sub_intervals=T,
                              freq_min=-0.2, freq_max=0.2)


def test_exp_of_zero_is_identity():
    assert np.array_equal(matrix_exponential(np.zeros((3, 3))), np.eye(3))


def test_exp_scalar_log_two():
    assert matrix_exponential([[-math.log(2)]])[0, 0] == pytest.approx(0.5, abs=1e-15)


def test_exp_nilpotent():
    out = matrix_exponential([[0.0, 1.0], [0.0, 0.0]])
    assert np.allclose(out, [[1.0, 1.0], [0.0, 1.0]], atol=1e-15)


def test_exp_rejects_non_square():
    with pytest.raises(DimensionError):
        matrix_exponential(np.ones((2, 3)))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t1=st.floats(0.0, 3.0), t2=st.floats(0.0, 3.0))
def test_semigroup_property(seed, t1, t2):
    M = np.random.default_rng(seed).normal(size=(3, 3))
    lhs = matrix_exponential(M, t1 + t2)
    rhs = matrix_exponential(M, t1) @ matrix_exponential(M, t2)
    assert np.allclose(lhs, rhs, rtol=1e-9, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t=st.floats(0.0, 5.0))
def test_exp_matches_scipy(seed, t):
    M = np.random.default_rng(seed).normal(size=(4, 4))
    ref = scipy.linalg.expm(M * t)
    assert np.allclose(matrix_exponential(M, t), ref, rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("a,b,dt", [(-0.5, 2.0, 4.0), (0.3, -1.0, 0.7), (-3.0, 1.0, 0.01)])
def test_zoh_scalar_closed_form(a, b, dt):
    A_d, B_d = zoh([[a]], [[b]], dt)
    assert A_d[0, 0] == pytest.approx(math.exp(a * dt), abs=1e-10)
    assert B_d[0, 0] == pytest.approx((math.exp(a * dt) - 1.0) / a * b, abs=1e-10)


def test_zoh_scalar_singular_uses_series():
    A_d, B_d = zoh([[0.0]], [[2.0]], 3.0)
    assert A_d[0, 0] == pytest.approx(1.0)
    assert B_d[0, 0] == pytest.approx(6.0, abs=1e-10)


@pytest.mark.parametrize("a,c,dt", [(-0.4, -1.3, 4.0), (-0.2, 0.1, 1.5), (-2.0, -0.5, 0.3)])
def test_zoh_two_by_two_closed_form(a, c, dt):
    # upper triangular with distinct eigenvalues, input on the second state
    A = np.array([[a, 1.0], [0.0, c]])
    B = np.array([[0.0], [1.0]])
    ea, ec = math.exp(a * dt), math.exp(c * dt)
    A_ref = np.array([[ea, (ea - ec) / (a - c)], [0.0, ec]])
    B_ref = np.array([((ea - 1) / a - (ec - 1) / c) / (a - c), (ec - 1) / c])
    A_d, B_d = zoh(A, B, dt)
    assert np.allclose(A_d, A_ref, atol=1e-10, rtol=0)
    assert np.allclose(B_d[:, 0], B_ref, atol=1e-10, rtol=0)


def test_n_step_recursion_matches_sampled_ode():
    cont = model(T=6)
    A_c, B_c = continuous_matrices(cont)
    A_d, B_d = zoh(A_c, B_c, cont.dt)
    rng = np.random.default_rng(4)
    dd = rng.uniform(-2, 2, cont.n_sub_intervals)
    x = np.zeros(A_c.shape[0])
    x_ode = x.copy()
    for t, u in enumerate(dd):
        x = A_d @ x + B_d[:, 0] * u
        sol = solve_ivp(lambda _, s: A_c @ s + B_c * u, (0.0, cont.dt), x_ode,
                        method="DOP853", rtol=1e-13, atol=1e-14)
        x_ode = sol.y[:, -1]
        assert np.allclose(x, x_ode, atol=1e-8, rtol=0), f"step {t + 1}"


def test_extracted_rows_reproduce_one_step():
    cont = model()
    dyn = zoh_discretize(cont)
    A_c, B_c = continuous_matrices(cont)
    A_d, B_d = zoh(A_c, B_c, cont.dt)
    g = 2
    rng = np.random.default_rng(9)
    s = rng.normal(size=2 * g + 1)
    u = 1.3
    nxt = A_d @ s + B_d[:, 0] * u
    pm, gv, w = s[:g], s[g:2 * g], s[2 * g]
    pm_next = dyn.alpha.T @ pm + dyn.beta.T @ gv + dyn.gamma * w + dyn.zeta * u
    w_next = dyn.rho * w + dyn.kappa @ pm + dyn.tau_coef @ gv + dyn.eta * u
    assert np.allclose(pm_next, nxt[:g], atol=1e-12)
    assert w_next == pytest.approx(nxt[2 * g], abs=1e-12)


def test_tiny_dt_limit():
    dyn = zoh_discretize(model(dt=1e-8))
    assert np.allclose(dyn.alpha, np.eye(2), atol=1e-6)
    assert dyn.rho == pytest.approx(1.0, abs=1e-6)
    for name in ("beta", "gamma", "zeta", "kappa", "tau_coef"):
        assert np.allclose(getattr(dyn, name), 0.0, atol=1e-6), name
    assert dyn.eta == pytest.approx(0.0, abs=1e-6)


def test_stable_continuous_system_has_contracting_sample():
    cont = model()
    A_c, _ = continuous_matrices(cont)
    assert np.max(np.linalg.eigvals(A_c).real) < 0
    A_d, _ = zoh(A_c, np.zeros((A_c.shape[0], 1)), cont.dt)
    assert np.max(np.abs(np.linalg.eigvals(A_d))) < 1


def test_gain_sign_convention():
    dyn = zoh_discretize(model())
    assert np.allclose(dyn.k_gain, [-4.0, -4.0 / 1.6])


def test_frequency_bounds_broadcast():
    dyn = zoh_discretize(model(T=4))
    assert dyn.freq_min.shape == (4,) and np.all(dyn.freq_max == 0.2)


def test_pass_through_rejects_wrong_alpha_shape():
    dyn = zoh_discretize(model())
    with pytest.raises(DimensionError, match="alpha"):
        pass_through(replace(dyn, alpha=np.eye(3)))


def test_pass_through_rejects_wrong_bound_length():
    dyn = zoh_discretize(model(T=3))
    with pytest.raises(DimensionError):
        pass_through(replace(dyn, freq_min=np.zeros(2)))


def test_implausible_rho_records_warning():
    dyn = zoh_discretize(model())
    out = pass_through(replace(dyn, rho=RHO_PLAUSIBLE + 0.5))
    assert out.warnings and "rho" in out.warnings[0]
    assert pass_through(dyn).warnings == ()


def test_pass_through_keeps_values():
    dyn = zoh_discretize(model())
    out = pass_through(dyn)
    assert np.array_equal(out.alpha, dyn.alpha) and out.rho == dyn.rho


@pytest.mark.parametrize("kw", [dict(t_ch=[0.0, 1.0]), dict(droop=[1.0]), dict(inertia=0.0)])
def test_invalid_continuous_parameters(kw):
    base = dict(t_ch=[5.0, 6.0], t_g=[2.0, 2.0], droop=[1.0, 1.6], inertia=30.0, damping=2.0, dt=4.0)
    base.update(kw)
    with pytest.raises(ValueError):
        ContinuousAgcModel(**base)

"""Discrete-time AGC coefficients.

The default source is a single-area model per generator n::

    d(pM_n)/dt  = (pGV_n - pM_n) / T_ch_n
    d(pGV_n)/dt = (-w / R_n - pGV_n) / T_g_n
    d(w)/dt     = (sum_n pM_n - dd - D w) / M

sampled with a zero-order hold on the disturbance ``dd``. The rows of the
sampled system for ``pM`` and ``w`` give the recursion coefficients; the
governor row is replaced in the optimisation model by the integral law
``pGV_{t+1} - pGV_t = K_n w_{t+1}`` with ``K_n = -dt / R_n`` (negative so
that the governor opposes a frequency drop).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .model import AgcDynamics

# |rho| beyond this is implausible for a sampled frequency state
RHO_PLAUSIBLE = 2.0
_SERIES_TOL = 1e-14


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class ContinuousAgcModel:
    t_ch: np.ndarray  # turbine time constants, s
    t_g: np.ndarray  # governor time constants, s
    droop: np.ndarray  # R, Hz/MW
    inertia: float  # M, MW s/Hz
    damping: float  # D, MW/Hz
    dt: float
    n_sub_intervals: int = 10
    freq_min: float | np.ndarray = -0.05
    freq_max: float | np.ndarray = 0.05

    def __post_init__(self):
        for name in ("t_ch", "t_g", "droop"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        g = self.t_ch.size
        if self.t_g.size != g or self.droop.size != g:
            raise DimensionError("per-generator parameters differ in length")
        if np.any(self.t_ch <= 0) or np.any(self.t_g <= 0) or np.any(self.droop <= 0):
            raise ValueError("time constants and droop must be positive")
        if self.inertia <= 0 or self.damping < 0 or self.dt <= 0:
            raise ValueError("need inertia > 0, damping >= 0, dt > 0")


def matrix_exponential(M, t: float = 1.0) -> np.ndarray:
    """``exp(M t)`` by scaling and squaring around a truncated Taylor series."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"matrix_exponential needs a square matrix, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    n = M.shape[0]
    X = M * t
    norm = np.abs(X).sum(axis=1).max() if n else 0.0
    squarings = max(0, int(math.ceil(math.log2(norm / 0.5)))) if norm > 0.5 else 0
    X = X / (2.0 ** squarings)
    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, 40):
        term = term @ X / k
        result = result + term
        if np.abs(term).max() <= 1e-18 * max(1.0, np.abs(result).max()):
            break
    for _ in range(squarings):
        result = result @ result
    return result


def zoh(A_c, B_c, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Zero-order-hold sampling of ``x' = A_c x + B_c u``."""
    A_c = np.asarray(A_c, dtype=float)
    B_c = np.asarray(B_c, dtype=float)
    if B_c.ndim == 1:
        B_c = B_c[:, None]
    A_d = matrix_exponential(A_c, dt)
    n = A_c.shape[0]
    if n and np.linalg.cond(A_c) < 1e10:
        B_d = np.linalg.solve(A_c, (A_d - np.eye(n)) @ B_c)
    else:
        B_d = _integral_series(A_c, B_c, dt)
    return A_d, B_d


def _integral_series(A_c: np.ndarray, B_c: np.ndarray, dt: float) -> np.ndarray:
    """``sum_k A^k dt^(k+1) / (k+1)! B``, for singular ``A``."""
    total = np.zeros_like(B_c)
    term = B_c * dt
    for k in range(1, 200):
        total = total + term
        if np.abs(term).max(initial=0.0) <= _SERIES_TOL:
            return total
        term = A_c @ term * dt / (k + 1)
    raise ValueError("integral series did not converge; A_c too ill-conditioned for dt")


def continuous_matrices(cont: ContinuousAgcModel) -> tuple[np.ndarray, np.ndarray]:
    """State matrix over ``(pM_1..G, pGV_1..G, w)`` and the disturbance column."""
    g = cont.t_ch.size
    A = np.zeros((2 * g + 1, 2 * g + 1))
    w = 2 * g
    for n in range(g):
        A[n, n] = -1.0 / cont.t_ch[n]
        A[n, g + n] = 1.0 / cont.t_ch[n]
        A[g + n, g + n] = -1.0 / cont.t_g[n]
        A[g + n, w] = -1.0 / (cont.droop[n] * cont.t_g[n])
        A[w, n] = 1.0 / cont.inertia
    A[w, w] = -cont.damping / cont.inertia
    B = np.zeros(2 * g + 1)
    B[w] = -1.0 / cont.inertia
    return A, B


def zoh_discretize(cont: ContinuousAgcModel) -> AgcDynamics:
    A_c, B_c = continuous_matrices(cont)
    A_d, B_d = zoh(A_c, B_c, cont.dt)
    B_d = B_d[:, 0]
    g = cont.t_ch.size
    pm = slice(0, g)
    gv = slice(g, 2 * g)
    w = 2 * g
    T = cont.n_sub_intervals
    dyn = AgcDynamics(
        n_sub_intervals=T,
        dt=cont.dt,
        # alpha[i, n]: effect of pM_i on pM_n
        alpha=A_d[pm, pm].T.copy(),
        beta=A_d[pm, gv].T.copy(),
        gamma=A_d[pm, w].copy(),
        zeta=B_d[pm].copy(),
        kappa=A_d[w, pm].copy(),
        tau_coef=A_d[w, gv].copy(),
        rho=float(A_d[w, w]),
        eta=float(B_d[w]),
        k_gain=-cont.dt / cont.droop,
        freq_min=np.broadcast_to(np.asarray(cont.freq_min, dtype=float), (T,)).copy(),
        freq_max=np.broadcast_to(np.asarray(cont.freq_max, dtype=float), (T,)).copy(),
    )
    return pass_through(dyn)


def pass_through(raw: AgcDynamics) -> AgcDynamics:
    """Validate user-supplied coefficients; returns them unchanged apart from
    plausibility warnings."""
    g = np.asarray(raw.gamma).size
    for name in ("alpha", "beta"):
        if np.shape(getattr(raw, name)) != (g, g):
            raise DimensionError(f"{name} must be {g}x{g}, got {np.shape(getattr(raw, name))}")
    for name in ("zeta", "kappa", "tau_coef", "k_gain"):
        if np.shape(getattr(raw, name)) != (g,):
            raise DimensionError(f"{name} must have {g} entries")
    T = raw.n_sub_intervals
    for name in ("freq_min", "freq_max"):
        if np.shape(getattr(raw, name)) != (T,):
            raise DimensionError(f"{name} must have {T} entries")
    warnings = list(raw.warnings)
    if abs(raw.rho) > RHO_PLAUSIBLE:
        msg = f"rho={raw.rho:.4g} outside [-{RHO_PLAUSIBLE}, {RHO_PLAUSIBLE}]"
        if msg not in warnings:
            warnings.append(msg)
    if tuple(warnings) != raw.warnings:
        return replace(raw, warnings=tuple(warnings))
    return raw

"""Brute-force robust feasibility, used to check the decomposition.

The inner problem at a fixed realisation is the min-slack LP: every block
of the compact form gets nonnegative slack columns (two for equality rows)
costing 1 per MW, so its optimum is zero exactly when a dispatch and AGC
trajectory exist. The worst case over a scaled box is taken over its
vertices, which is exact because the optimum is convex in the realisation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .compact import BLOCKS, CompactForm, assemble
from .errors import BaseInfeasibleError
from .model import ScaleVector, SystemCase, UncertaintyModel, objective_coefficients
from .solver import DEFAULT_TOLERANCES, LinearProgram, SolverError, Status, Tolerances
from .solver.simplex import BoundedSimplex

MAX_UNCERTAIN_DIMS = 20
FEASIBLE_TOL = 1e-6
BISECTION_TOL = 1e-6

# sense of each block and whether its slack is two-sided
_SENSE = {"A1": "<", "A2": "=", "A3": "<", "A4": "=", "A5": "=", "A6": "<", "A7": "<"}


class EnumerationGuardError(ValueError):
    pass


@dataclass(frozen=True)
class VertexAssignment:
    up_b: tuple[bool, ...]
    up_t: tuple[bool, ...]


def _stack_rows(cf: CompactForm):
    """Row blocks over the (x, y) columns in block order."""
    nx, ny = cf.n_x, cf.n_y
    zx = np.zeros
    mats = {
        "A1": np.hstack((cf.A1.toarray(), zx((cf.n_rows("A1"), ny)))),
        "A2": np.hstack((cf.A2.toarray(), zx((1, ny)))),
        "A3": np.hstack((cf.A3.toarray(), zx((cf.n_rows("A3"), ny)))),
        "A4": np.hstack((zx((cf.n_rows("A4"), nx)), cf.A4.toarray())),
        "A5": np.hstack((zx((cf.n_rows("A5"), nx)), cf.A5.toarray())),
        "A6": np.hstack((zx((cf.n_rows("A6"), nx)), cf.A6.toarray())),
        "A7": np.hstack((cf.A7.toarray(), cf.A8.toarray())),
    }
    return mats


def _rhs(cf: CompactForm, d, dd) -> np.ndarray:
    return np.concatenate([cf.rhs(k, d, dd) for k in BLOCKS])


def min_slack_program(cf: CompactForm, d, dd) -> LinearProgram:
    """The min-slack LP as a LinearProgram over ``(x, y, slacks)``."""
    mats = _stack_rows(cf)
    nxy = cf.n_x + cf.n_y
    rows, senses, slack_cols = [], [], []
    for k in BLOCKS:
        M = mats[k]
        rows.append(M)
        senses.extend(_SENSE[k] * M.shape[0])
    A0 = np.vstack(rows)
    m = A0.shape[0]
    offset = 0
    for k in BLOCKS:
        r = mats[k].shape[0]
        for i in range(offset, offset + r):
            if _SENSE[k] == "=":
                slack_cols += [(i, 1.0), (i, -1.0)]
            else:
                slack_cols.append((i, -1.0))
        offset += r
    S = np.zeros((m, len(slack_cols)))
    for j, (i, v) in enumerate(slack_cols):
        S[i, j] = v
    A = np.hstack((A0, S))
    c = np.concatenate((np.zeros(nxy), np.ones(len(slack_cols))))
    x_free = ~cf.x_nonneg
    y_free = ~cf.y_nonneg
    lb = np.concatenate((np.where(x_free, -np.inf, 0.0), np.where(y_free, -np.inf, 0.0),
                         np.zeros(len(slack_cols))))
    return LinearProgram(c, A, senses, _rhs(cf, d, dd), lb=lb)


def min_slack_lp(cf: CompactForm, d, dd, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Minimal total slack at the realisation ``(d, dd)``."""
    _check_dims(cf, d, dd)
    engine = BoundedSimplex(min_slack_program(cf, d, dd), tol)
    status = engine.solve()
    if status is not Status.OPTIMAL:
        raise SolverError(f"min-slack LP ended {status.value}")
    return max(0.0, engine.result(status).objective)


def min_slack_dual_program(cf: CompactForm, d, dd) -> LinearProgram:
    """Explicit dual of the min-slack LP over ``(mu1, ..., mu7)``.

    Inequality rows have multipliers in [-1, 0], equality rows in [-1, 1];
    each primal column gives a dual row (``<= 0`` for a nonnegative column,
    ``= 0`` for a free one).
    """
    _check_dims(cf, d, dd)
    mats = _stack_rows(cf)
    At = np.vstack([mats[k] for k in BLOCKS]).T
    nonneg = np.concatenate((cf.x_nonneg, cf.y_nonneg))
    senses = np.where(nonneg, "<", "=")
    lb, ub = [], []
    for k in BLOCKS:
        r = mats[k].shape[0]
        lb += [-1.0] * r
        ub += [1.0 if _SENSE[k] == "=" else 0.0] * r
    return LinearProgram(_rhs(cf, d, dd), At, senses, np.zeros(At.shape[0]),
                         lb=np.array(lb), ub=np.array(ub), maximize=True)


def _check_dims(cf: CompactForm, d, dd) -> None:
    if np.size(d) != cf.H2.shape[1] or np.size(dd) != cf.H4.shape[1]:
        raise ValueError("realisation dimensions do not match the compact form")


class _VertexSolver:
    """Min-slack LP re-solved across right-hand sides with warm starts."""

    def __init__(self, cf: CompactForm, d0, dd0, tol: Tolerances):
        self.cf = cf
        self.engine = BoundedSimplex(min_slack_program(cf, d0, dd0), tol)
        self.started = False

    def value(self, d, dd) -> float:
        if not self.started:
            self.engine.b = _rhs(self.cf, d, dd)
            status = self.engine.solve()
            self.started = True
        else:
            self.engine.set_rhs(_rhs(self.cf, d, dd))
            status = self.engine.reoptimize()
        if status is not Status.OPTIMAL:
            # fall back to a cold start once before giving up
            status = self.engine.solve()
            if status is not Status.OPTIMAL:
                raise SolverError(f"min-slack LP ended {status.value}")
        return max(0.0, float(self.engine.result(status).objective))


def _gray(k: int):
    """Gray-code sequence of k-bit masks, each differing from the previous in one bit."""
    for i in range(1 << k):
        g = i ^ (i >> 1)
        yield tuple(bool((g >> j) & 1) for j in range(k))


def worst_case_eta(cf: CompactForm, u: UncertaintyModel, lam: ScaleVector,
                   tol: Tolerances = DEFAULT_TOLERANCES) -> tuple[float, VertexAssignment]:
    """Maximum of the min-slack LP over the vertices of the scaled box.

    Dimensions whose up and down deviations are both zero contribute a
    single vertex; the rest are walked in Gray-code order so consecutive
    LPs differ in one right-hand-side entry.
    """
    nb, nt = u.n_buses, u.n_sub
    if nb + nt > MAX_UNCERTAIN_DIMS:
        raise EnumerationGuardError(
            f"{nb + nt} uncertain dimensions exceed the enumeration limit of {MAX_UNCERTAIN_DIMS}")
    if lam.n_buses != nb or lam.n_sub != nt:
        raise ValueError("scale vector dimensions do not match the uncertainty model")
    live_b = (lam.up_b * u.d_hat != 0) | (lam.dn_b * u.d_hat != 0)
    live_t = (lam.up_t * u.delta_d_hat != 0) | (lam.dn_t * u.delta_d_hat != 0)
    live = np.concatenate((live_b, live_t))
    idx = np.flatnonzero(live)
    solver = _VertexSolver(cf, u.d_bar, u.delta_d_bar, tol)
    best, arg = -1.0, None
    for bits in _gray(idx.size):
        mask = np.ones(nb + nt, dtype=bool)
        mask[idx] = bits
        d, dd = u.realization(lam, mask[:nb], mask[nb:])
        val = solver.value(d, dd)
        if val > best:
            best, arg = val, VertexAssignment(tuple(mask[:nb]), tuple(mask[nb:]))
    return best, arg


def brute_force_eta(cf: CompactForm, u: UncertaintyModel, lam: ScaleVector,
                    tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Same maximum with a cold solve per vertex and no deduplication."""
    nb, nt = u.n_buses, u.n_sub
    if nb + nt > MAX_UNCERTAIN_DIMS:
        raise EnumerationGuardError("too many uncertain dimensions")
    best = -1.0
    for bits in itertools.product((True, False), repeat=nb + nt):
        mask = np.array(bits, dtype=bool)
        d, dd = u.realization(lam, mask[:nb], mask[nb:])
        best = max(best, min_slack_lp(cf, d, dd, tol))
    return best


def reference_flexibility(case: SystemCase, weights, cf: CompactForm | None = None,
                          tol: Tolerances = DEFAULT_TOLERANCES) -> tuple[float, float]:
    """Largest ``s`` in [0, 1] with ``s * w`` robustly feasible, and ``a^T (s w)``.

    Bisection to ``BISECTION_TOL`` on ``s``; raises BaseInfeasibleError when
    the nominal point already needs slack.
    """
    u = case.uncertainty
    w = np.asarray(weights, dtype=float).ravel()
    if w.size != u.dim:
        raise ValueError(f"weights need {u.dim} entries")
    if np.any(w < 0) or np.any(w > 1):
        raise ValueError("weights must lie in [0, 1]")
    cf = cf or assemble(case)

    def eta(s: float) -> float:
        return worst_case_eta(cf, u, ScaleVector.from_array(s * w, u.n_buses, u.n_sub), tol)[0]

    base = eta(0.0)
    if base > FEASIBLE_TOL:
        raise BaseInfeasibleError(base)
    a = objective_coefficients(u)
    if eta(1.0) <= FEASIBLE_TOL:
        return 1.0, float(a @ w)
    lo, hi = 0.0, 1.0
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if eta(mid) <= FEASIBLE_TOL:
            lo = mid
        else:
            hi = mid
    return lo, float(a @ (lo * w))


def lambda_grid(dim: int, step: float) -> list[np.ndarray]:
    """Uniform rays ``s * 1`` plus single-component axes, on a ``step`` grid."""
    if not 0 < step <= 1:
        raise ValueError("grid step must be in (0, 1]")
    levels = np.round(np.arange(0.0, 1.0 + 1e-12, step), 12)
    if levels[-1] < 1.0:
        levels = np.append(levels, 1.0)
    pts = [np.full(dim, s) for s in levels]
    for j in range(dim):
        for s in levels[1:]:
            v = np.zeros(dim)
            v[j] = s
            pts.append(v)
    return pts

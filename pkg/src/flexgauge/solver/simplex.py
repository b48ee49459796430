"""Bounded-variable revised simplex (primal and dual) on dense matrices.

Internally every problem is ``min cost^T x, A x + s = b, lo <= (x, s) <= hi``
with one slack column per row (its bounds encode the row sense) and one
artificial column per row that is only ever non-fixed during phase 1.
The basis inverse is kept explicitly, updated by rank-one eta steps and
refactorised periodically.
"""

from __future__ import annotations

import numpy as np

from .lp import DEFAULT_TOLERANCES, LinearProgram, SolveResult, SolverError, Status, Tolerances

BASIC, LOWER, UPPER, FREE = 0, 1, 2, 3

REFACTOR_EVERY = 60
# residual accepted for an updated (not refactored) inverse
ACCURACY = 1e-10
_DEGENERATE_STEP = 1e-12


class BoundedSimplex:
    """Stateful simplex engine over a fixed constraint matrix.

    Bounds of structural columns and the right-hand side may be changed
    between solves; ``reoptimize`` then warm-starts from the current basis
    (dual simplex when the basis stays dual feasible).
    """

    def __init__(self, lp: LinearProgram, tol: Tolerances = DEFAULT_TOLERANCES,
                 max_iter: int | None = None):
        self.lp = lp
        self.tol = tol
        self.A = lp.A
        self.m, self.n = lp.A.shape
        m, n = self.m, self.n
        self.N = n + 2 * m
        self.max_iter = max_iter if max_iter is not None else 50 * (m + n)
        self.sign = -1.0 if lp.maximize else 1.0
        self.cost = np.zeros(self.N)
        self.cost[:n] = self.sign * lp.c
        self.b = lp.b.copy()

        self.lo = np.empty(self.N)
        self.hi = np.empty(self.N)
        self.lo[:n], self.hi[:n] = lp.lb, lp.ub
        sl = slice(n, n + m)
        self.lo[sl] = np.where(lp.senses == ">", -np.inf, 0.0)
        self.hi[sl] = np.where(lp.senses == "<", np.inf, 0.0)
        self.lo[n + m:] = 0.0
        self.hi[n + m:] = 0.0
        self.art_sign = np.ones(m)

        self.state = np.full(self.N, LOWER, dtype=np.int8)
        self.x = np.zeros(self.N)
        self.basis = np.arange(n, n + m)
        self.Binv = np.eye(m)
        self._since_refactor = 0
        self.iterations = 0
        self.solved = False

    # -- linear algebra helpers -------------------------------------------

    def _col(self, j: int) -> np.ndarray:
        if j < self.n:
            return self.A[:, j]
        e = np.zeros(self.m)
        if j < self.n + self.m:
            e[j - self.n] = 1.0
        else:
            e[j - self.n - self.m] = self.art_sign[j - self.n - self.m]
        return e

    def _row_product(self, v: np.ndarray) -> np.ndarray:
        """``v^T [A | I | diag(art_sign)]``."""
        return np.concatenate((v @ self.A, v, v * self.art_sign))

    def _nonbasic_activity(self) -> np.ndarray:
        xn = self.x.copy()
        xn[self.basis] = 0.0
        n, m = self.n, self.m
        return self.A @ xn[:n] + xn[n:n + m] + self.art_sign * xn[n + m:]

    def _refactor(self) -> None:
        B = np.column_stack([self._col(j) for j in self.basis]) if self.m else np.zeros((0, 0))
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - numerical breakdown
            raise SolverError("singular basis matrix") from exc
        self.x[self.basis] = self.Binv @ (self.b - self._nonbasic_activity())
        self._since_refactor = 0

    def _basis_accurate(self) -> bool:
        """Refresh basic values from the updated inverse and accept them when
        they reproduce the right-hand side to ``ACCURACY``; cheaper than a
        refactorisation after a short run of pivots."""
        rhs = self.b - self._nonbasic_activity()
        xb = self.Binv @ rhs
        self.x[self.basis] = xb
        resid = self._basic_product(xb) - rhs
        scale = 1.0 + np.abs(rhs).max(initial=0.0)
        return bool(np.abs(resid).max(initial=0.0) <= ACCURACY * scale)

    def _basic_product(self, xb: np.ndarray) -> np.ndarray:
        n, m = self.n, self.m
        full = np.zeros(self.N)
        full[self.basis] = xb
        return self.A @ full[:n] + full[n:n + m] + self.art_sign * full[n + m:]

    def _pivot(self, r: int, q: int, w: np.ndarray) -> None:
        pivot_row = self.Binv[r] / w[r]
        self.Binv -= np.outer(w, pivot_row)
        self.Binv[r] = pivot_row
        self.basis[r] = q
        self.state[q] = BASIC
        self._since_refactor += 1

    def _place_nonbasic(self, j: int) -> None:
        lo, hi = self.lo[j], self.hi[j]
        if np.isfinite(lo):
            self.state[j], self.x[j] = LOWER, lo
        elif np.isfinite(hi):
            self.state[j], self.x[j] = UPPER, hi
        else:
            self.state[j], self.x[j] = FREE, 0.0

    def _reduced_costs(self, cost: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        y = cost[self.basis] @ self.Binv
        d = cost - self._row_product(y)
        d[self.basis] = 0.0
        return y, d

    # -- primal simplex ------------------------------------------------------

    def _entering(self, d: np.ndarray, bland: bool) -> tuple[int, float]:
        tol = self.tol.reduced_cost
        movable = self.hi > self.lo
        st = self.state
        up = movable & (((st == LOWER) | (st == FREE)) & (d < -tol))
        down = movable & (((st == UPPER) | (st == FREE)) & (d > tol))
        cand = up | down
        if not cand.any():
            return -1, 0.0
        if bland:
            q = int(np.flatnonzero(cand)[0])
        else:
            score = np.where(cand, np.abs(d), -1.0)
            q = int(np.argmax(score))
        return q, (1.0 if up[q] else -1.0)

    def _primal_ratio(self, w: np.ndarray, direction: float, q: int, bland: bool):
        zp, ftol = self.tol.zero_pivot, self.tol.feasibility
        delta = direction * w
        xb = self.x[self.basis]
        lb = self.lo[self.basis]
        ub = self.hi[self.basis]
        dec = delta > zp
        inc = delta < -zp
        with np.errstate(invalid="ignore", divide="ignore"):
            exact = np.full(self.m, np.inf)
            exact[dec] = (xb[dec] - lb[dec]) / delta[dec]
            exact[inc] = (ub[inc] - xb[inc]) / (-delta[inc])
        exact = np.where(np.isnan(exact), np.inf, np.maximum(exact, 0.0))
        flip = self.hi[q] - self.lo[q]
        if not np.isfinite(exact).any():
            return -1, flip, delta
        if bland:
            theta = exact.min()
            ties = np.flatnonzero(exact <= theta + _DEGENERATE_STEP)
            r = int(ties[np.argmin(self.basis[ties])])
        else:
            with np.errstate(invalid="ignore", divide="ignore"):
                relaxed = np.full(self.m, np.inf)
                relaxed[dec] = (xb[dec] - lb[dec] + ftol) / delta[dec]
                relaxed[inc] = (ub[inc] - xb[inc] + ftol) / (-delta[inc])
            relaxed = np.where(np.isnan(relaxed), np.inf, relaxed)
            # drifted basics can make the relaxed bound negative
            bound = max(relaxed.min(), exact.min())
            ties = np.flatnonzero(exact <= bound)
            r = int(ties[np.argmax(np.abs(delta[ties]))])
            theta = exact[r]
        if flip <= theta:
            return -1, flip, delta
        return r, theta, delta

    def _primal(self, cost: np.ndarray) -> Status:
        stalled = 0
        bland = False
        while True:
            if self._since_refactor >= REFACTOR_EVERY:
                self._refactor()
            _, d = self._reduced_costs(cost)
            q, direction = self._entering(d, bland)
            if q < 0:
                if self._since_refactor and not self._basis_accurate():
                    self._refactor()
                    continue
                return Status.OPTIMAL
            if self.iterations >= self.max_iter:
                return Status.ITERATION_LIMIT
            w = self.Binv @ self._col(q)
            r, theta, delta = self._primal_ratio(w, direction, q, bland)
            if not np.isfinite(theta):
                return Status.UNBOUNDED
            self.iterations += 1
            self.x[self.basis] -= theta * delta
            if r < 0:
                self.x[q] = self.hi[q] if direction > 0 else self.lo[q]
                self.state[q] = UPPER if direction > 0 else LOWER
            else:
                self.x[q] += theta * direction
                leave = self.basis[r]
                if delta[r] > 0:
                    self.x[leave], self.state[leave] = self.lo[leave], LOWER
                else:
                    self.x[leave], self.state[leave] = self.hi[leave], UPPER
                self._pivot(r, q, w)
            if theta <= _DEGENERATE_STEP:
                stalled += 1
                if stalled > self.m:
                    bland = True
            else:
                stalled = 0
                bland = False

    # -- dual simplex --------------------------------------------------------

    def _dual_feasible(self, d: np.ndarray) -> bool:
        tol = self.tol.reduced_cost * 10
        movable = self.hi > self.lo
        st = self.state
        bad = movable & (((st == LOWER) & (d < -tol)) | ((st == UPPER) & (d > tol))
                         | ((st == FREE) & (np.abs(d) > tol)))
        return not bad.any()

    def _dual(self, cost: np.ndarray) -> Status:
        ftol, zp = self.tol.feasibility, self.tol.zero_pivot
        stalled = 0
        bland = False
        while True:
            if self._since_refactor >= REFACTOR_EVERY:
                self._refactor()
            xb = self.x[self.basis]
            below = self.lo[self.basis] - xb
            above = xb - self.hi[self.basis]
            viol = np.maximum(below, above)
            if viol.max(initial=0.0) <= ftol:
                if self._since_refactor and not self._basis_accurate():
                    self._refactor()
                    continue
                return Status.OPTIMAL
            if self.iterations >= self.max_iter:
                return Status.ITERATION_LIMIT
            if bland:
                rows = np.flatnonzero(viol > ftol)
                r = int(rows[np.argmin(self.basis[rows])])
            else:
                r = int(np.argmax(viol))
            raise_up = below[r] > above[r]
            alpha = self._row_product(self.Binv[r])
            _, d = self._reduced_costs(cost)
            st = self.state
            nonbasic = (st != BASIC) & (self.hi > self.lo)
            inc_ok = (st == LOWER) | (st == FREE)
            dec_ok = (st == UPPER) | (st == FREE)
            if raise_up:
                elig = nonbasic & ((inc_ok & (alpha < -zp)) | (dec_ok & (alpha > zp)))
            else:
                elig = nonbasic & ((inc_ok & (alpha > zp)) | (dec_ok & (alpha < -zp)))
            if not elig.any():
                return Status.INFEASIBLE
            idx = np.flatnonzero(elig)
            a_abs = np.abs(alpha[idx])
            d_abs = np.abs(d[idx])
            if bland:
                ratios = d_abs / a_abs
                ties = idx[ratios <= ratios.min() + _DEGENERATE_STEP]
                q = int(ties.min())
            else:
                bound = ((d_abs + self.tol.reduced_cost) / a_abs).min()
                ratios = d_abs / a_abs
                near = ratios <= bound
                pick = np.argmax(np.where(near, a_abs, -1.0))
                q = int(idx[pick])
            target = self.lo[self.basis[r]] if raise_up else self.hi[self.basis[r]]
            w = self.Binv @ self._col(q)
            step = (xb[r] - target) / w[r]
            self.iterations += 1
            self.x[self.basis] -= step * w
            self.x[q] += step
            leave = self.basis[r]
            self.x[leave] = target
            self.state[leave] = LOWER if raise_up else UPPER
            self._pivot(r, q, w)
            if abs(d[q]) <= _DEGENERATE_STEP:
                stalled += 1
                if stalled > self.m:
                    bland = True
            else:
                stalled = 0
                bland = False

    # -- public entry points -------------------------------------------------

    def solve(self) -> Status:
        """Cold start: phase 1 on artificials, then phase 2."""
        n, m = self.n, self.m
        self.iterations = 0
        for j in range(n + m):
            self._place_nonbasic(j)
        self.lo[n + m:] = 0.0
        self.hi[n + m:] = 0.0
        self.x[n + m:] = 0.0
        self.state[n + m:] = LOWER
        resid = self.b - self._nonbasic_activity()
        slack_lo, slack_hi = self.lo[n:n + m], self.hi[n:n + m]
        fits = (resid >= slack_lo) & (resid <= slack_hi)
        self.basis = np.where(fits, np.arange(n, n + m), np.arange(n + m, n + 2 * m))
        self.art_sign = np.where(fits | (resid >= 0), 1.0, -1.0)
        art = ~fits
        self.hi[n + m:][art] = np.inf
        self.state[self.basis] = BASIC
        self.x[self.basis] = np.where(fits, resid, np.abs(resid))
        self.Binv = np.diag(1.0 / np.where(fits, 1.0, self.art_sign))
        self._since_refactor = 0

        if art.any():
            phase1 = np.zeros(self.N)
            phase1[n + m:] = 1.0
            status = self._primal(phase1)
            if status is not Status.OPTIMAL:
                return status
            self._refactor()
            if self.x[n + m:].sum() > self.tol.feasibility:
                return Status.INFEASIBLE
            self.hi[n + m:] = 0.0
            nb_art = np.arange(n + m, n + 2 * m)
            nb_art = nb_art[self.state[nb_art] != BASIC]
            self.x[nb_art] = 0.0
            self.state[nb_art] = LOWER
        status = self._primal(self.cost)
        self.solved = status is Status.OPTIMAL
        return status

    def set_bounds(self, lb: np.ndarray, ub: np.ndarray) -> None:
        n = self.n
        self.lo[:n], self.hi[:n] = lb, ub
        for j in np.flatnonzero(self.state[:n] != BASIC):
            st = self.state[j]
            if st == UPPER and np.isfinite(self.hi[j]):
                self.x[j] = self.hi[j]
            elif st == LOWER and np.isfinite(self.lo[j]):
                self.x[j] = self.lo[j]
            else:
                self._place_nonbasic(j)
        self.x[self.basis] = self.Binv @ (self.b - self._nonbasic_activity())

    def set_rhs(self, b: np.ndarray) -> None:
        self.b = np.asarray(b, dtype=float).copy()
        self.x[self.basis] = self.Binv @ (self.b - self._nonbasic_activity())

    def reoptimize(self) -> Status:
        """Re-solve after bound/rhs changes, warm-starting when possible."""
        if not self.solved:
            return self.solve()
        self.iterations = 0
        _, d = self._reduced_costs(self.cost)
        if self._dual_feasible(d):
            status = self._dual(self.cost)
            if status is Status.OPTIMAL:
                status = self._primal(self.cost)
        else:
            status = self.solve()
        self.solved = status is Status.OPTIMAL
        return status

    def snapshot(self, with_inverse: bool = True) -> tuple:
        Binv = self.Binv.copy() if with_inverse else None
        return (self.basis.copy(), self.state.copy(), self.x.copy(), Binv,
                self.art_sign.copy(), self.lo.copy(), self.hi.copy(), self.solved)

    def restore(self, snap: tuple, with_inverse: bool = True) -> None:
        basis, state, x, Binv, art_sign, lo, hi, solved = snap
        self.basis, self.state, self.x = basis.copy(), state.copy(), x.copy()
        self.art_sign, self.lo, self.hi = art_sign.copy(), lo.copy(), hi.copy()
        self.solved = solved
        if with_inverse and Binv is not None:
            self.Binv = Binv.copy()
            self._since_refactor = 0
        else:
            self._refactor()

    def result(self, status: Status) -> SolveResult:
        if status is not Status.OPTIMAL:
            return SolveResult(status, iterations=self.iterations)
        n = self.n
        y, d = self._reduced_costs(self.cost)
        x = self.x[:n].copy()
        return SolveResult(
            Status.OPTIMAL,
            objective=float(self.lp.c @ x),
            x=x,
            duals=self.sign * y,
            reduced_costs=self.sign * d[:n],
            iterations=self.iterations,
        )


def solve_lp(lp: LinearProgram, tol: Tolerances = DEFAULT_TOLERANCES,
             max_iter: int | None = None) -> SolveResult:
    """Solve a continuous LP; integrality flags are rejected."""
    if lp.integer.any():
        raise ValueError("solve_lp called with integrality flags; use solve_mip")
    engine = BoundedSimplex(lp, tol, max_iter)
    status = engine.solve()
    return engine.result(status)


def dual_objective(lp: LinearProgram, result: SolveResult) -> float:
    """Objective of the dual solution carried by an optimal LP result.

    ``b^T y`` plus the bound contributions of the reduced costs; equals the
    primal objective at an optimal basis.
    """
    y, d = result.duals, result.reduced_costs
    bound_val = np.where(d > 0, lp.lb, lp.ub) if not lp.maximize else np.where(d > 0, lp.ub, lp.lb)
    bound_val = np.where(np.abs(d) <= 1e-12, 0.0, bound_val)
    return float(lp.b @ y + np.sum(np.where(np.abs(d) <= 1e-12, 0.0, d * bound_val)))

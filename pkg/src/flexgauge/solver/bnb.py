"""LP-based branch and bound over binary variables."""

from __future__ import annotations

import heapq
import itertools

import numpy as np

from .lp import DEFAULT_TOLERANCES, LinearProgram, SolveResult, Status, Tolerances
from .simplex import BoundedSimplex

INVERSE_BUDGET_BYTES = 256 * 2**20


class _Node:
    __slots__ = ("bound", "lb", "ub", "snap", "x", "depth")

    def __init__(self, bound, lb, ub, snap, x, depth):
        self.bound = bound
        self.lb = lb
        self.ub = ub
        self.snap = snap
        self.x = x
        self.depth = depth


def solve_mip(lp: LinearProgram, tol: Tolerances = DEFAULT_TOLERANCES,
              node_limit: int = 1_000_000, max_iter: int | None = None) -> SolveResult:
    """Best-first branch and bound, branching on the most fractional binary.

    Internally minimises; a node is pruned when its LP bound is within
    ``tol.optimality`` of the incumbent. Children are warm-started from the
    parent basis with the dual simplex.
    """
    sign = -1.0 if lp.maximize else 1.0
    binaries = np.flatnonzero(lp.integer)
    engine = BoundedSimplex(lp.relaxed(), tol, max_iter)
    status = engine.solve()
    total_iters = engine.iterations
    if status is not Status.OPTIMAL:
        return SolveResult(status, iterations=total_iters, nodes=1)

    def internal_obj() -> float:
        return sign * float(lp.c @ engine.x[: lp.n_cols])

    # open nodes keep their basis inverse while it fits the memory budget
    inverse_slots = max(1, INVERSE_BUDGET_BYTES // max(1, 8 * engine.m * engine.m))
    incumbent_val = np.inf
    incumbent_x = None
    counter = itertools.count()
    heap: list = []
    nodes = 1

    def consider(lb: np.ndarray, ub: np.ndarray, depth: int) -> None:
        nonlocal incumbent_val, incumbent_x
        x = engine.x[: lp.n_cols].copy()
        val = internal_obj()
        if val >= incumbent_val - tol.optimality:
            return
        frac = np.abs(x[binaries] - np.round(x[binaries]))
        if binaries.size == 0 or frac.max() <= tol.integrality:
            fixed_x = _polish(engine, lb, ub, binaries, x)
            if fixed_x is not None:
                fval = sign * float(lp.c @ fixed_x)
                if fval < incumbent_val:
                    incumbent_val, incumbent_x = fval, fixed_x
            return
        keep_inverse = len(heap) < inverse_slots
        heapq.heappush(heap, (val, next(counter),
                              _Node(val, lb, ub, engine.snapshot(with_inverse=keep_inverse), x, depth)))

    root_lb, root_ub = lp.lb.copy(), lp.ub.copy()
    consider(root_lb, root_ub, 0)
    limit_hit = False
    while heap:
        val, _, node = heapq.heappop(heap)
        if val >= incumbent_val - tol.optimality:
            continue
        if nodes >= node_limit:
            limit_hit = True
            break
        xb = node.x[binaries]
        frac = np.abs(xb - np.round(xb))
        # most fractional; argmax keeps the lowest index on ties
        k = binaries[int(np.argmax(np.where(frac > tol.integrality, frac, -1.0)))]
        engine.restore(node.snap, with_inverse=node.snap[3] is not None)
        parent = engine.snapshot()
        for fix in (0.0, 1.0):
            lb, ub = node.lb.copy(), node.ub.copy()
            lb[k] = ub[k] = fix
            engine.restore(parent)
            engine.set_bounds(lb, ub)
            st = engine.reoptimize()
            total_iters += engine.iterations
            nodes += 1
            if st is Status.OPTIMAL:
                consider(lb, ub, node.depth + 1)
        node.snap = None
    if incumbent_x is None:
        status = Status.NODE_LIMIT if limit_hit else Status.INFEASIBLE
        return SolveResult(status, iterations=total_iters, nodes=nodes)
    res = SolveResult(
        Status.NODE_LIMIT if limit_hit else Status.OPTIMAL,
        objective=float(lp.c @ incumbent_x),
        x=incumbent_x,
        iterations=total_iters,
        nodes=nodes,
    )
    if limit_hit:
        res.stats["best_bound"] = sign * heap[0][0] if heap else res.objective
    return res


def _polish(engine: BoundedSimplex, lb, ub, binaries, x):
    """Fix binaries at their rounded values and re-solve, so that the
    returned point is exactly integral."""
    rounded = np.round(x[binaries])
    if np.array_equal(rounded, x[binaries]):
        return x
    lb2, ub2 = lb.copy(), ub.copy()
    lb2[binaries] = ub2[binaries] = rounded
    snap = engine.snapshot()
    engine.set_bounds(lb2, ub2)
    st = engine.reoptimize()
    out = engine.x[: engine.n].copy() if st is Status.OPTIMAL else None
    engine.restore(snap)
    return out

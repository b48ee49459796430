"""Problem and result containers shared by the LP and MIP solvers."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class Tolerances:
    """Every numerical tolerance used by the solvers, in one place."""

    feasibility: float = 1e-7
    optimality: float = 1e-6  # absolute MIP gap
    integrality: float = 1e-6
    zero_pivot: float = 1e-10
    reduced_cost: float = 1e-9


DEFAULT_TOLERANCES = Tolerances()


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration-limit"
    NODE_LIMIT = "node-limit"


class SolverError(RuntimeError):
    """Raised when a solve cannot produce what the caller asked for."""


SENSES = ("<", "=", ">")


@dataclass
class LinearProgram:
    """``opt c^T x  s.t.  A x (<,=,>) b,  lb <= x <= ub``.

    Columns flagged in ``integer`` must be binary (bounds inside [0, 1]).
    Bounds may be infinite. ``A`` may be dense or scipy sparse; it is stored
    dense because the instances here are desk-scale.
    """

    c: np.ndarray
    A: np.ndarray
    senses: Sequence[str]
    b: np.ndarray
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None
    integer: np.ndarray | None = None
    maximize: bool = False
    row_names: list[str] | None = None
    col_names: list[str] | None = None

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        if sp.issparse(self.A):
            self.A = self.A.toarray()
        self.A = np.asarray(self.A, dtype=float)
        if self.A.size == 0:
            self.A = self.A.reshape(0, n)
        if self.A.ndim != 2 or self.A.shape[1] != n:
            raise ValueError(f"A has shape {self.A.shape}, expected (m, {n})")
        m = self.A.shape[0]
        self.b = np.asarray(self.b, dtype=float).ravel()
        if self.b.size != m:
            raise ValueError(f"b has {self.b.size} entries, expected {m}")
        self.senses = np.asarray(list(self.senses), dtype="<U1")
        if self.senses.size != m or not np.isin(self.senses, SENSES).all():
            raise ValueError("senses must hold one of '<', '=', '>' per row")
        self.lb = np.zeros(n) if self.lb is None else np.asarray(self.lb, dtype=float).ravel()
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).ravel()
        if self.lb.size != n or self.ub.size != n:
            raise ValueError("bounds must have one entry per column")
        if np.any(self.lb == np.inf) or np.any(self.ub == -np.inf):
            raise ValueError("lower bounds must be < +inf and upper bounds > -inf")
        if np.any(self.lb > self.ub):
            raise ValueError("lower bound above upper bound")
        if self.integer is None:
            self.integer = np.zeros(n, dtype=bool)
        self.integer = np.asarray(self.integer, dtype=bool).ravel()
        if self.integer.size != n:
            raise ValueError("integrality flags must have one entry per column")
        flagged = self.integer
        if np.any(self.lb[flagged] < 0) or np.any(self.ub[flagged] > 1):
            raise ValueError("only binary integer variables are supported")
        if self.row_names is not None and len(self.row_names) != m:
            raise ValueError("row_names length mismatch")
        if self.col_names is not None and len(self.col_names) != n:
            raise ValueError("col_names length mismatch")

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def n_cols(self) -> int:
        return self.c.size

    def with_bounds(self, lb: np.ndarray, ub: np.ndarray) -> "LinearProgram":
        return LinearProgram(
            self.c, self.A, self.senses, self.b, lb, ub, self.integer,
            self.maximize, self.row_names, self.col_names,
        )

    def relaxed(self) -> "LinearProgram":
        """Copy with integrality dropped."""
        return LinearProgram(
            self.c, self.A, self.senses, self.b, self.lb, self.ub, None,
            self.maximize, self.row_names, self.col_names,
        )


@dataclass
class SolveResult:
    status: Status
    objective: float | None = None
    x: np.ndarray | None = None
    # d(objective)/d(b_i) in the problem's own sense; LP only
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    iterations: int = 0
    nodes: int = 0
    stats: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


def extract_duals(result: SolveResult, row_map: Mapping[str, Sequence[int]]) -> dict[str, np.ndarray]:
    """Group the row duals of an optimal LP result by constraint name.

    ``row_map`` maps a constraint-block name to its row indices. The sign
    convention is the sensitivity of the optimal objective to the right-hand
    side: for a minimisation, ``<`` rows carry duals <= 0, ``>`` rows >= 0
    and ``=`` rows are free (reversed for a maximisation).
    """
    if result.status is not Status.OPTIMAL:
        raise SolverError(f"no duals for a {result.status.value} result")
    if result.duals is None:
        raise SolverError("result carries no dual values (MIP solves have none)")
    return {name: result.duals[np.asarray(rows, dtype=int)] for name, rows in row_map.items()}


def _fmt(v: float) -> str:
    return repr(float(v))


def write_lp_file(lp: LinearProgram, path) -> None:
    """Dump ``lp`` in CPLEX LP text format for cross-checking elsewhere."""
    cols = lp.col_names or [f"x{j}" for j in range(lp.n_cols)]
    rows = lp.row_names or [f"r{i}" for i in range(lp.n_rows)]
    cols = [_lp_name(s) for s in cols]
    rows = [_lp_name(s) for s in rows]

    def expr(coefs: np.ndarray) -> str:
        terms = [f"{'+' if v >= 0 else '-'} {_fmt(abs(v))} {cols[j]}"
                 for j, v in enumerate(coefs) if v != 0.0]
        return " ".join(terms) if terms else f"0 {cols[0]}"

    lines = ["Maximize" if lp.maximize else "Minimize", f" obj: {expr(lp.c)}", "Subject To"]
    op = {"<": "<=", "=": "=", ">": ">="}
    for i in range(lp.n_rows):
        lines.append(f" {rows[i]}: {expr(lp.A[i])} {op[lp.senses[i]]} {_fmt(lp.b[i])}")
    lines.append("Bounds")
    for j, name in enumerate(cols):
        lo, hi = lp.lb[j], lp.ub[j]
        if np.isinf(lo) and np.isinf(hi):
            lines.append(f" {name} free")
        else:
            lo_s = "-inf" if np.isinf(lo) else _fmt(lo)
            hi_s = "+inf" if np.isinf(hi) else _fmt(hi)
            lines.append(f" {lo_s} <= {name} <= {hi_s}")
    binaries = [cols[j] for j in np.flatnonzero(lp.integer)]
    if binaries:
        lines.append("Binaries")
        lines.extend(f" {name}" for name in binaries)
    lines.append("End")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _lp_name(label: str) -> str:
    out = "".join(ch if ch.isalnum() or ch in "_.()" else "_" for ch in label)
    return out if out and not out[0].isdigit() else "_" + out

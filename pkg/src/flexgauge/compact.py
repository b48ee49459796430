"""Assembly of the block-structured constraint system.

For a realisation ``d`` (bus loads) and ``dd`` (per-sub-interval system
disturbance) the dispatch ``x`` and AGC trajectory ``y`` must satisfy::

    A1 x <= b1                       generation limits, reserve caps and
                                     requirements, cost epigraph
    A2 x  = H2 d                     system power balance
    A3 x <= b3 + H3 d                line limits, both directions
    A4 y  = H4 dd                    AGC state recursion
    A5 y  = b5                       governor law with slack pair
    A6 y <= b6                       ramp limits, frequency band
    A7 x + A8 y <= b7                budget, regulation envelope

``x = (p, regU, regD, sr, cost)`` is nonnegative; ``cost`` holds one
epigraph variable per generator for its piecewise-linear cost. ``y``
stacks ``pM[n, t]``, ``pGV[n, t]``, ``w[t]`` (free) and the governor slacks
``fGV+[n, t]``, ``fGV-[n, t]`` (nonnegative) for t = 1..T; the state at
t = 0 is fixed at zero.

Row counts, with G generators, S cost segments in total, L lines and T
sub-intervals: A1 5G+3+S, A2 1, A3 2L, A4 (G+1)T, A5 GT, A6 2GT+2T,
A7 1+2GT.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .model import SystemCase, validate_case

BLOCKS = ("A1", "A2", "A3", "A4", "A5", "A6", "A7")


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True)
class CompactForm:
    A1: sp.csr_matrix
    A2: sp.csr_matrix
    A3: sp.csr_matrix
    A4: sp.csr_matrix
    A5: sp.csr_matrix
    A6: sp.csr_matrix
    A7: sp.csr_matrix
    A8: sp.csr_matrix
    H2: sp.csr_matrix
    H3: sp.csr_matrix
    H4: sp.csr_matrix
    b1: np.ndarray
    b3: np.ndarray
    b5: np.ndarray
    b6: np.ndarray
    b7: np.ndarray
    a: np.ndarray
    x_labels: tuple[str, ...]
    y_labels: tuple[str, ...]
    x_nonneg: np.ndarray
    y_nonneg: np.ndarray
    x_cost_aux: np.ndarray
    row_labels: dict = field(default_factory=dict)
    # +1 for rows stored as written, -1 for >= rows stored negated
    row_signs: dict = field(default_factory=dict)

    @property
    def n_x(self) -> int:
        return len(self.x_labels)

    @property
    def n_y(self) -> int:
        return len(self.y_labels)

    @property
    def x_index(self) -> dict[str, int]:
        return {lab: j for j, lab in enumerate(self.x_labels)}

    @property
    def y_index(self) -> dict[str, int]:
        return {lab: j for j, lab in enumerate(self.y_labels)}

    def n_rows(self, block: str) -> int:
        return len(self.row_labels[block])

    def rhs(self, block: str, d=None, dd=None) -> np.ndarray:
        """Right-hand side of ``block`` at a realisation."""
        if block == "A1":
            return self.b1
        if block == "A2":
            return self.H2 @ d
        if block == "A3":
            return self.b3 + self.H3 @ d
        if block == "A4":
            return self.H4 @ dd
        if block == "A5":
            return self.b5
        if block == "A6":
            return self.b6
        if block == "A7":
            return self.b7
        raise KeyError(block)


class _Rows:
    """Row collector for one block: coefficients on x, on y, on the random
    vector, and a constant right-hand side."""

    def __init__(self):
        self.labels: list[str] = []
        self.signs: list[int] = []
        self.x: list[dict] = []
        self.y: list[dict] = []
        self.h: list[dict] = []
        self.rhs: list[float] = []

    def add(self, label, x=None, y=None, h=None, rhs=0.0, sign=1):
        self.labels.append(label)
        self.signs.append(sign)
        self.x.append(x or {})
        self.y.append(y or {})
        self.h.append(h or {})
        self.rhs.append(float(rhs))

    @staticmethod
    def _matrix(rows: list[dict], n_cols: int) -> sp.csr_matrix:
        r, c, v = [], [], []
        for i, row in enumerate(rows):
            for j, coef in row.items():
                if coef != 0.0:
                    r.append(i)
                    c.append(j)
                    v.append(coef)
        return sp.csr_matrix((v, (r, c)), shape=(len(rows), n_cols))

    def mx(self, n):
        return self._matrix(self.x, n)

    def my(self, n):
        return self._matrix(self.y, n)

    def mh(self, n):
        return self._matrix(self.h, n)


def assemble(case: SystemCase) -> CompactForm:
    problems = validate_case(case)
    if problems:
        raise AssemblyError("invalid case: " + "; ".join(problems))
    gens = case.generators
    G = len(gens)
    T = case.agc.n_sub_intervals
    B = len(case.buses)
    agc = case.agc

    x_labels: list[str] = []
    for kind in ("p", "regU", "regD", "sr", "cost"):
        x_labels.extend(f"{kind}[{g.id}]" for g in gens)
    xi = {lab: j for j, lab in enumerate(x_labels)}

    def X(kind, n):
        return xi[f"{kind}[{gens[n].id}]"]

    y_labels: list[str] = []
    for kind in ("pM", "pGV"):
        y_labels.extend(f"{kind}[{g.id},{t}]" for g in gens for t in range(1, T + 1))
    y_labels.extend(f"w[{t}]" for t in range(1, T + 1))
    for kind in ("fGV+", "fGV-"):
        y_labels.extend(f"{kind}[{g.id},{t}]" for g in gens for t in range(1, T + 1))
    yi = {lab: j for j, lab in enumerate(y_labels)}

    def Y(kind, n, t):
        # t = 0 is the fixed zero initial state
        if t == 0:
            return None
        if kind == "w":
            return yi[f"w[{t}]"]
        return yi[f"{kind}[{gens[n].id},{t}]"]

    def terms(*pairs):
        out: dict[int, float] = {}
        for col, coef in pairs:
            if col is not None and coef != 0.0:
                out[col] = out.get(col, 0.0) + coef
        return out

    # A1: generator limits, reserve caps, system requirements, cost epigraph
    r1 = _Rows()
    for n, g in enumerate(gens):
        r1.add(f"gen_max[{g.id}]", terms((X("p", n), 1), (X("regU", n), 1), (X("sr", n), 1)), rhs=g.p_max)
        r1.add(f"gen_min[{g.id}]", terms((X("p", n), -1), (X("regD", n), 1)), rhs=-g.p_min, sign=-1)
        r1.add(f"reg_up_cap[{g.id}]", terms((X("regU", n), 1)), rhs=g.reg_up_cap)
        r1.add(f"reg_dn_cap[{g.id}]", terms((X("regD", n), 1)), rhs=g.reg_dn_cap)
        r1.add(f"sr_cap[{g.id}]", terms((X("sr", n), 1)), rhs=g.sr_cap)
    res = case.reserves
    r1.add("sr_req", terms(*[(X("sr", n), -1) for n in range(G)]), rhs=-res.sr_min, sign=-1)
    r1.add("reg_up_req", terms(*[(X("regU", n), -1) for n in range(G)]), rhs=-res.reg_min_up, sign=-1)
    r1.add("reg_dn_req", terms(*[(X("regD", n), -1) for n in range(G)]), rhs=-res.reg_min_dn, sign=-1)
    for n, g in enumerate(gens):
        for k, (slope, intercept) in enumerate(g.cost_pieces()):
            r1.add(f"cost_seg[{g.id},{k}]", terms((X("p", n), slope), (X("cost", n), -1)), rhs=-intercept)

    # A2 / H2: system balance
    r2 = _Rows()
    r2.add("balance", terms(*[(X("p", n), 1) for n in range(G)]), h={b: 1.0 for b in range(B)})

    # A3 / H3: line flows within +-F
    r3 = _Rows()
    bidx = case.bus_index
    for ln in case.lines:
        sf_p = [(X("p", n), ln.shift_factors[g.bus_id]) for n, g in enumerate(gens)]
        sf_d = {bidx[b]: float(v) for b, v in ln.shift_factors.items() if v != 0.0}
        r3.add(f"flow+[{ln.id}]", terms(*sf_p), h=sf_d, rhs=ln.capacity)
        r3.add(f"flow-[{ln.id}]", terms(*[(c, -v) for c, v in sf_p]),
               h={b: -v for b, v in sf_d.items()}, rhs=ln.capacity)

    # A4 / H4: recursion for t -> t+1 driven by dd_t (t = 0..T-1)
    r4 = _Rows()
    alpha, beta = np.asarray(agc.alpha), np.asarray(agc.beta)
    for t in range(T):
        for n, g in enumerate(gens):
            pairs = [(Y("pM", n, t + 1), 1.0), (Y("w", None, t), -agc.gamma[n])]
            pairs += [(Y("pM", i, t), -alpha[i, n]) for i in range(G)]
            pairs += [(Y("pGV", i, t), -beta[i, n]) for i in range(G)]
            r4.add(f"dyn_pM[{g.id},{t + 1}]", y=terms(*pairs), h={t: float(agc.zeta[n])})
        pairs = [(Y("w", None, t + 1), 1.0), (Y("w", None, t), -agc.rho)]
        pairs += [(Y("pM", i, t), -agc.kappa[i]) for i in range(G)]
        pairs += [(Y("pGV", i, t), -agc.tau_coef[i]) for i in range(G)]
        r4.add(f"dyn_w[{t + 1}]", y=terms(*pairs), h={t: float(agc.eta)})

    # A5: governor law with slack pair
    r5 = _Rows()
    for n, g in enumerate(gens):
        for t in range(T):
            r5.add(f"gov[{g.id},{t + 1}]", y=terms(
                (Y("pGV", n, t + 1), 1.0), (Y("pGV", n, t), -1.0),
                (Y("fGV+", n, t + 1), 1.0), (Y("fGV-", n, t + 1), -1.0),
                (Y("w", None, t + 1), -agc.k_gain[n])))

    # A6: ramping and frequency band
    r6 = _Rows()
    for n, g in enumerate(gens):
        for t in range(T):
            r6.add(f"ramp_up[{g.id},{t + 1}]",
                   y=terms((Y("pM", n, t + 1), 1.0), (Y("pM", n, t), -1.0)), rhs=g.rur)
            r6.add(f"ramp_dn[{g.id},{t + 1}]",
                   y=terms((Y("pM", n, t), 1.0), (Y("pM", n, t + 1), -1.0)), rhs=g.rdr)
    for t in range(T):
        r6.add(f"freq_max[{t + 1}]", y=terms((Y("w", None, t + 1), 1.0)), rhs=agc.freq_max[t])
        r6.add(f"freq_min[{t + 1}]", y=terms((Y("w", None, t + 1), -1.0)), rhs=-agc.freq_min[t], sign=-1)

    # A7 / A8: budget and regulation envelope
    r7 = _Rows()
    pen = []
    for n, g in enumerate(gens):
        for t in range(1, T + 1):
            pen += [(Y("fGV+", n, t), g.cp), (Y("fGV-", n, t), g.cp)]
    r7.add("budget", terms(*[(X("cost", n), 1.0) for n in range(G)]), y=terms(*pen), rhs=case.budget)
    for n, g in enumerate(gens):
        for t in range(1, T + 1):
            r7.add(f"reg_up[{g.id},{t}]", terms((X("regU", n), -1.0)), y=terms((Y("pGV", n, t), 1.0)))
            r7.add(f"reg_dn[{g.id},{t}]", terms((X("regD", n), -1.0)), y=terms((Y("pGV", n, t), -1.0)))

    nx, ny = len(x_labels), len(y_labels)
    blocks = {"A1": r1, "A2": r2, "A3": r3, "A4": r4, "A5": r5, "A6": r6, "A7": r7}
    for name, rows in blocks.items():
        if name in ("A1", "A2", "A3", "A7"):
            pass
        elif any(rows.x):
            raise AssemblyError(f"block {name} unexpectedly touches x")
    y_nonneg = np.array([lab.startswith("fGV") for lab in y_labels])
    cf = CompactForm(
        A1=r1.mx(nx), A2=r2.mx(nx), A3=r3.mx(nx), A4=r4.my(ny), A5=r5.my(ny), A6=r6.my(ny),
        A7=r7.mx(nx), A8=r7.my(ny),
        H2=r2.mh(B), H3=r3.mh(B), H4=r4.mh(T),
        b1=np.array(r1.rhs), b3=np.array(r3.rhs), b5=np.array(r5.rhs), b6=np.array(r6.rhs),
        b7=np.array(r7.rhs),
        a=_objective(case),
        x_labels=tuple(x_labels), y_labels=tuple(y_labels),
        x_nonneg=np.ones(nx, dtype=bool), y_nonneg=y_nonneg,
        x_cost_aux=np.array([lab.startswith("cost[") for lab in x_labels]),
        row_labels={k: tuple(v.labels) for k, v in blocks.items()},
        row_signs={k: np.array(v.signs) for k, v in blocks.items()},
    )
    _check_counts(case, cf)
    return cf


def _objective(case: SystemCase) -> np.ndarray:
    from .model import objective_coefficients

    return objective_coefficients(case.uncertainty)


def expected_row_counts(case: SystemCase) -> dict[str, int]:
    G = len(case.generators)
    S = sum(len(g.cost_segments) for g in case.generators)
    L = len(case.lines)
    T = case.agc.n_sub_intervals
    return {"A1": 5 * G + 3 + S, "A2": 1, "A3": 2 * L, "A4": (G + 1) * T,
            "A5": G * T, "A6": 2 * G * T + 2 * T, "A7": 1 + 2 * G * T}


def _check_counts(case: SystemCase, cf: CompactForm) -> None:
    want = expected_row_counts(case)
    got = {k: cf.n_rows(k) for k in BLOCKS}
    if want != got:
        raise AssemblyError(f"row counts {got} differ from {want}")
    labels = [lab for k in BLOCKS for lab in cf.row_labels[k]]
    if len(set(labels)) != len(labels):
        raise AssemblyError("duplicate row labels")


def evaluate_feasibility(cf: CompactForm, x, y, d, dd) -> dict[str, float]:
    """Largest violation per block (and of the sign restrictions) at a point."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = np.asarray(d, dtype=float)
    dd = np.asarray(dd, dtype=float)
    if x.size != cf.n_x or y.size != cf.n_y:
        raise ValueError("x or y has the wrong dimension")
    if d.size != cf.H2.shape[1] or dd.size != cf.H4.shape[1]:
        raise ValueError("realisation has the wrong dimension")

    def pos(v):
        return float(np.max(v, initial=0.0)) if v.size else 0.0

    out = {
        "A1": pos(cf.A1 @ x - cf.b1),
        "A2": float(np.max(np.abs(cf.A2 @ x - cf.H2 @ d), initial=0.0)),
        "A3": pos(cf.A3 @ x - cf.b3 - cf.H3 @ d),
        "A4": float(np.max(np.abs(cf.A4 @ y - cf.H4 @ dd), initial=0.0)),
        "A5": float(np.max(np.abs(cf.A5 @ y - cf.b5), initial=0.0)),
        "A6": pos(cf.A6 @ y - cf.b6),
        "A7": pos(cf.A7 @ x + cf.A8 @ y - cf.b7),
        "bounds": max(pos(-x[cf.x_nonneg]), pos(-y[cf.y_nonneg])),
    }
    return out


def dump_blocks(cf: CompactForm, path) -> None:
    """Write every nonzero as ``block<TAB>row<TAB>column<TAB>coefficient``."""
    d_cols = [f"d[{b}]" for b in range(cf.H2.shape[1])]
    dd_cols = [f"dd[{t}]" for t in range(cf.H4.shape[1])]
    pieces = [("A1", cf.A1, cf.x_labels, "A1"), ("A2", cf.A2, cf.x_labels, "A2"),
              ("H2", cf.H2, d_cols, "A2"), ("A3", cf.A3, cf.x_labels, "A3"),
              ("H3", cf.H3, d_cols, "A3"), ("A4", cf.A4, cf.y_labels, "A4"),
              ("H4", cf.H4, dd_cols, "A4"), ("A5", cf.A5, cf.y_labels, "A5"),
              ("A6", cf.A6, cf.y_labels, "A6"), ("A7", cf.A7, cf.x_labels, "A7"),
              ("A8", cf.A8, cf.y_labels, "A7")]
    with open(path, "w", encoding="utf-8") as fh:
        for name, mat, cols, rows_of in pieces:
            coo = mat.tocoo()
            order = np.lexsort((coo.col, coo.row))
            for k in order:
                fh.write(f"{name}\t{cf.row_labels[rows_of][coo.row[k]]}\t{cols[coo.col[k]]}\t{float(coo.data[k])!r}\n")
        for name, vec in (("b1", cf.b1), ("b3", cf.b3), ("b5", cf.b5), ("b6", cf.b6), ("b7", cf.b7)):
            rows_of = {"b1": "A1", "b3": "A3", "b5": "A5", "b6": "A6", "b7": "A7"}[name]
            for i, v in enumerate(vec):
                if v != 0.0:
                    fh.write(f"{name}\t{cf.row_labels[rows_of][i]}\trhs\t{float(v)!r}\n")

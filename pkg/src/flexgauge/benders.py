"""Decomposition for the largest robustly feasible uncertainty box.

The master is an LP over the scales ``lam`` with accumulated feasibility
cuts. The subproblem is the dual of the min-slack LP, maximised jointly over
the box vertices: each uncertain dimension gets a binary pair ``z+ + z- = 1``
picking its deviation direction, and every product ``z * mu`` of a binary
with a dual multiplier in [-1, 0] is replaced by an auxiliary ``w`` under
the exact McCormick rows::

    w + z >= 0,   w - mu >= 0,   w - mu + z <= 1,   -1 <= w <= 0

Equality multipliers in [-1, 1] are split as ``mu = mu_n - mu_p`` first.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .compact import CompactForm, assemble
from .errors import BaseInfeasibleError, IterationLimitError
from .model import (FlexReport, ScaleVector, SystemCase, UncertaintyModel, compute_indices,
                    objective_coefficients, validate_case)
from .solver import (DEFAULT_TOLERANCES, LinearProgram, SolverError, Status, Tolerances,
                     solve_lp, solve_mip)

FEASIBILITY_TOL = 1e-6
DEFAULT_MAX_ITERS = 200


# -- master ------------------------------------------------------------------

@dataclass(frozen=True)
class CutRecord:
    """Feasibility cut ``coef @ lam + constant <= 0`` (canonical lam order)."""

    coef: np.ndarray
    constant: float
    iteration: int
    eta: float

    def evaluate(self, lam) -> float:
        vec = lam.as_array() if isinstance(lam, ScaleVector) else np.asarray(lam, dtype=float)
        return float(self.coef @ vec + self.constant)


@dataclass
class MasterProblem:
    a: np.ndarray
    cuts: list[CutRecord] = field(default_factory=list)

    def add_cut(self, cut: CutRecord) -> None:
        if cut.coef.shape != self.a.shape:
            raise ValueError("cut dimension differs from the master")
        self.cuts.append(cut)

    def as_lp(self) -> LinearProgram:
        n = self.a.size
        if self.cuts:
            A = np.vstack([c.coef for c in self.cuts])
            b = np.array([-c.constant for c in self.cuts])
        else:
            A, b = np.zeros((0, n)), np.zeros(0)
        return LinearProgram(self.a, A, ["<"] * len(b), b, lb=np.zeros(n), ub=np.ones(n),
                             maximize=True)


def solve_master(mp: MasterProblem, tol: Tolerances = DEFAULT_TOLERANCES) -> tuple[np.ndarray, float]:
    res = solve_lp(mp.as_lp(), tol)
    if res.status is Status.INFEASIBLE:
        raise SolverError("master problem infeasible: the cuts exclude every scale vector")
    if not res.optimal:
        raise SolverError(f"master problem ended {res.status.value}")
    lam = np.clip(res.x, 0.0, 1.0)
    return lam, float(mp.a @ lam)


# -- subproblem --------------------------------------------------------------

@dataclass(frozen=True)
class RdfeaProblem:
    lp: LinearProgram
    cols: dict  # block name -> column slice ("mu1", "mu2n", ..., "zb+", ...)
    aux_mu: np.ndarray  # multiplier column of each auxiliary
    aux_z: np.ndarray  # binary column of each auxiliary
    aux_start: int
    lam: ScaleVector

    @property
    def n_binaries(self) -> int:
        return int(self.lp.integer.sum())


@dataclass
class RdfeaSolution:
    eta: float
    mu: dict  # "mu1".."mu7", with mu2 and mu4 recombined
    z_up_b: np.ndarray
    z_up_t: np.ndarray
    nodes: int


def _layout(cf: CompactForm, nb: int, nt: int):
    sizes = [("mu1", cf.n_rows("A1")), ("mu2n", 1), ("mu2p", 1), ("mu3", cf.n_rows("A3")),
             ("mu4n", cf.n_rows("A4")), ("mu4p", cf.n_rows("A4")), ("mu5", cf.n_rows("A5")),
             ("mu6", cf.n_rows("A6")), ("mu7", cf.n_rows("A7")),
             ("zb+", nb), ("zb-", nb), ("zt+", nt), ("zt-", nt)]
    cols, k = {}, 0
    for name, size in sizes:
        cols[name] = slice(k, k + size)
        k += size
    return cols, k


def build_rdfea(cf: CompactForm, u: UncertaintyModel, lam: ScaleVector,
                full_envelope: bool = False) -> RdfeaProblem:
    """Linearised dual subproblem at the scales ``lam``.

    By default only the envelope side the objective pushes against is kept:
    an auxiliary with a positive coefficient is maximised onto
    ``min(0, mu + 1 - z)``, one with a negative coefficient onto
    ``max(-z, mu)``, and one with a zero coefficient is dropped. The omitted
    rows never bind, so every node relaxation has the same value as with
    ``full_envelope=True``, which keeps all three rows for every pair.
    """
    nb, nt = u.n_buses, u.n_sub
    if cf.H2.shape[1] != nb or cf.H4.shape[1] != nt:
        raise ValueError("uncertainty model does not match the compact form")
    if lam.n_buses != nb or lam.n_sub != nt:
        raise ValueError("scale vector does not match the uncertainty model")
    if not lam.in_unit_box():
        raise ValueError("scale vector outside [0, 1]")
    cols, n_base = _layout(cf, nb, nt)
    H2, H3, H4 = cf.H2.toarray(), cf.H3.toarray(), cf.H4.toarray()

    # auxiliaries: (mu column, z column, objective coefficient)
    aux = []
    for b in range(nb):
        up = lam.up_b[b] * u.d_hat[b]
        dn = lam.dn_b[b] * u.d_hat[b]
        zp, zm = cols["zb+"].start + b, cols["zb-"].start + b
        terms = [(cols["mu2n"].start + i, H2[i, b]) for i in np.flatnonzero(H2[:, b])]
        terms += [(cols["mu2p"].start + i, -H2[i, b]) for i in np.flatnonzero(H2[:, b])]
        terms += [(cols["mu3"].start + i, H3[i, b]) for i in np.flatnonzero(H3[:, b])]
        for mu_col, h in terms:
            aux.append((mu_col, zp, up * h))
            aux.append((mu_col, zm, -dn * h))
    for t in range(nt):
        up = lam.up_t[t] * u.delta_d_hat[t]
        dn = lam.dn_t[t] * u.delta_d_hat[t]
        zp, zm = cols["zt+"].start + t, cols["zt-"].start + t
        rows = np.flatnonzero(H4[:, t])
        terms = [(cols["mu4n"].start + i, H4[i, t]) for i in rows]
        terms += [(cols["mu4p"].start + i, -H4[i, t]) for i in rows]
        for mu_col, h in terms:
            aux.append((mu_col, zp, up * h))
            aux.append((mu_col, zm, -dn * h))
    if not full_envelope:
        aux = [a for a in aux if a[2] != 0.0]
    n_aux = len(aux)
    n = n_base + n_aux

    c = np.zeros(n)
    c[cols["mu1"]] = cf.b1
    nom2 = H2 @ u.d_bar
    c[cols["mu2n"]] = nom2
    c[cols["mu2p"]] = -nom2
    c[cols["mu3"]] = cf.b3 + H3 @ u.d_bar
    nom4 = H4 @ u.delta_d_bar
    c[cols["mu4n"]] = nom4
    c[cols["mu4p"]] = -nom4
    c[cols["mu5"]] = cf.b5
    c[cols["mu6"]] = cf.b6
    c[cols["mu7"]] = cf.b7
    aux_mu = np.array([a[0] for a in aux], dtype=int)
    aux_z = np.array([a[1] for a in aux], dtype=int)
    c[n_base:] = [a[2] for a in aux]

    lb = np.full(n, -1.0)
    ub = np.zeros(n)
    ub[cols["mu5"]] = 1.0
    integer = np.zeros(n, dtype=bool)
    for name in ("zb+", "zb-", "zt+", "zt-"):
        lb[cols[name]] = 0.0
        ub[cols[name]] = 1.0
        integer[cols[name]] = True
    # a dimension with no deviation either way cannot affect the objective;
    # pin its direction so branching never visits it
    dead_b = (lam.up_b * u.d_hat == 0) & (lam.dn_b * u.d_hat == 0)
    dead_t = (lam.up_t * u.delta_d_hat == 0) & (lam.dn_t * u.delta_d_hat == 0)
    for name_p, name_m, dead in (("zb+", "zb-", dead_b), ("zt+", "zt-", dead_t)):
        idx = np.flatnonzero(dead)
        lb[cols[name_p].start + idx] = 1.0
        ub[cols[name_m].start + idx] = 0.0

    # dual rows, one per x column then one per y column
    nx, ny = cf.n_x, cf.n_y
    A1, A2, A3 = cf.A1.toarray(), cf.A2.toarray(), cf.A3.toarray()
    A4, A5, A6 = cf.A4.toarray(), cf.A5.toarray(), cf.A6.toarray()
    A7, A8 = cf.A7.toarray(), cf.A8.toarray()
    m_dual = nx + ny
    m_link = nb + nt
    envelope = []
    for k, (mu_col, z_col, coef) in enumerate(aux):
        w = n_base + k
        if full_envelope or coef < 0:
            envelope.append(({w: 1.0, z_col: 1.0}, ">", 0.0))                 # w + z >= 0
            envelope.append(({w: 1.0, mu_col: -1.0}, ">", 0.0))               # w - mu >= 0
        if full_envelope or coef > 0:
            envelope.append(({w: 1.0, mu_col: -1.0, z_col: 1.0}, "<", 1.0))   # w - mu + z <= 1
    m = m_dual + m_link + len(envelope)
    A = np.zeros((m, n))
    A[:nx, cols["mu1"]] = A1.T
    A[:nx, cols["mu2n"]] = A2.T
    A[:nx, cols["mu2p"]] = -A2.T
    A[:nx, cols["mu3"]] = A3.T
    A[:nx, cols["mu7"]] = A7.T
    A[nx:m_dual, cols["mu4n"]] = A4.T
    A[nx:m_dual, cols["mu4p"]] = -A4.T
    A[nx:m_dual, cols["mu5"]] = A5.T
    A[nx:m_dual, cols["mu6"]] = A6.T
    A[nx:m_dual, cols["mu7"]] = A8.T
    senses = ["<"] * nx + ["<" if nn else "=" for nn in cf.y_nonneg]
    rhs = [0.0] * m_dual
    r = m_dual
    for name_p, name_m, k in (("zb+", "zb-", nb), ("zt+", "zt-", nt)):
        for j in range(k):
            A[r, cols[name_p].start + j] = 1.0
            A[r, cols[name_m].start + j] = 1.0
            senses.append("=")
            rhs.append(1.0)
            r += 1
    for coefs, sense, value in envelope:
        for j, v in coefs.items():
            A[r, j] = v
        senses.append(sense)
        rhs.append(value)
        r += 1

    names = [""] * n
    for name, sl in cols.items():
        for j in range(sl.start, sl.stop):
            names[j] = f"{name}[{j - sl.start}]"
    for k in range(n_aux):
        names[n_base + k] = f"w[{k}]"
    lp = LinearProgram(c, A, senses, np.array(rhs), lb=lb, ub=ub, integer=integer,
                       maximize=True, col_names=names)
    return RdfeaProblem(lp, cols, aux_mu, aux_z, n_base, lam)


def solve_rdfea(p: RdfeaProblem, tol: Tolerances = DEFAULT_TOLERANCES,
                node_limit: int = 1_000_000) -> RdfeaSolution:
    res = solve_mip(p.lp, tol, node_limit=node_limit)
    if not res.optimal:
        raise SolverError(f"subproblem ended {res.status.value}")
    x = res.x
    cols = p.cols
    mu = {
        "mu1": x[cols["mu1"]],
        "mu2": x[cols["mu2n"]] - x[cols["mu2p"]],
        "mu3": x[cols["mu3"]],
        "mu4": x[cols["mu4n"]] - x[cols["mu4p"]],
        "mu5": x[cols["mu5"]],
        "mu6": x[cols["mu6"]],
        "mu7": x[cols["mu7"]],
    }
    z_up_b = x[cols["zb+"]] > 0.5
    z_up_t = x[cols["zt+"]] > 0.5
    return RdfeaSolution(max(0.0, float(res.objective)), mu, z_up_b, z_up_t, res.nodes)


def cut_from_duals(cf: CompactForm, u: UncertaintyModel, sol: RdfeaSolution,
                   iteration: int = 0) -> CutRecord:
    """Cut from a fixed dual point and fixed vertex directions.

    With ``mu`` and ``z`` held, the dual objective is affine in ``lam`` and
    lower-bounds the min-slack value at that vertex for every ``lam``, so
    ``eta(lam) <= 0`` is valid for all robustly feasible scales.
    """
    if sol.eta <= 0:
        raise ValueError("a cut needs a positive subproblem value")
    mu = sol.mu
    pi_b = cf.H2.T @ mu["mu2"] + cf.H3.T @ mu["mu3"]
    pi_t = cf.H4.T @ mu["mu4"]
    const = (cf.b1 @ mu["mu1"] + cf.b3 @ mu["mu3"] + cf.b5 @ mu["mu5"] + cf.b6 @ mu["mu6"]
             + cf.b7 @ mu["mu7"] + u.d_bar @ pi_b + u.delta_d_bar @ pi_t)
    zb = sol.z_up_b.astype(float)
    zt = sol.z_up_t.astype(float)
    coef = ScaleVector(u.d_hat * pi_b * zb, -u.d_hat * pi_b * (1 - zb),
                       u.delta_d_hat * pi_t * zt, -u.delta_d_hat * pi_t * (1 - zt))
    return CutRecord(coef.as_array(), float(const), iteration, sol.eta)


# -- loop --------------------------------------------------------------------

@dataclass(frozen=True)
class BendersOptions:
    tol: float = FEASIBILITY_TOL
    max_iters: int = DEFAULT_MAX_ITERS
    solver_tol: Tolerances = DEFAULT_TOLERANCES
    node_limit: int = 1_000_000


def base_eta(cf: CompactForm, u: UncertaintyModel, options: BendersOptions = BendersOptions()) -> float:
    zero = ScaleVector.zeros(u.n_buses, u.n_sub)
    return solve_rdfea(build_rdfea(cf, u, zero), options.solver_tol, options.node_limit).eta


def run_benders(case: SystemCase, options: BendersOptions = BendersOptions(),
                cf: CompactForm | None = None) -> FlexReport:
    problems = validate_case(case)
    if problems:
        raise ValueError("invalid case: " + "; ".join(problems))
    cf = cf or assemble(case)
    u = case.uncertainty
    eta0 = base_eta(cf, u, options)
    if eta0 > options.tol:
        raise BaseInfeasibleError(eta0)
    mp = MasterProblem(objective_coefficients(u))
    trace = []
    start = time.perf_counter()
    for it in range(1, options.max_iters + 1):
        lam_vec, obj = solve_master(mp, options.solver_tol)
        lam = ScaleVector.from_array(lam_vec, u.n_buses, u.n_sub)
        sol = solve_rdfea(build_rdfea(cf, u, lam), options.solver_tol, options.node_limit)
        record = {"iteration": it, "master_objective": obj, "eta": sol.eta,
                  "cut_constant": None, "wall_time": time.perf_counter() - start}
        trace.append(record)
        if sol.eta <= options.tol:
            return FlexReport(compute_indices(lam, u), lam, it, list(mp.cuts), trace)
        cut = cut_from_duals(cf, u, sol, it)
        record["cut_constant"] = cut.constant
        mp.add_cut(cut)
    report = FlexReport(compute_indices(lam, u), lam, options.max_iters, list(mp.cuts), trace)
    raise IterationLimitError(options.max_iters, report)


def nominal_dispatch_cost(case: SystemCase, cf: CompactForm | None = None,
                          tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Least generation cost of the dispatch at nominal load, ignoring AGC."""
    cf = cf or assemble(case)
    d = case.uncertainty.d_bar
    A = np.vstack((cf.A1.toarray(), cf.A2.toarray(), cf.A3.toarray()))
    b = np.concatenate((cf.b1, cf.H2 @ d, cf.b3 + cf.H3 @ d))
    senses = ["<"] * cf.n_rows("A1") + ["="] + ["<"] * cf.n_rows("A3")
    c = cf.x_cost_aux.astype(float)
    res = solve_lp(LinearProgram(c, A, senses, b), tol)
    if not res.optimal:
        raise BaseInfeasibleError(float("inf"))
    return float(res.objective)


__all__ = [
    "BendersOptions", "CutRecord", "MasterProblem", "RdfeaProblem", "RdfeaSolution",
    "base_eta", "build_rdfea", "cut_from_duals", "nominal_dispatch_cost", "run_benders",
    "solve_master", "solve_rdfea",
]

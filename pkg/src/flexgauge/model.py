"""Domain data for the flexibility problem and the seven flexibility indices.

All containers are frozen dataclasses holding numpy arrays; treat them as
read-only once built.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Bus:
    id: str
    d_bar: float  # nominal load, MW
    d_hat: float  # max deviation, MW


@dataclass(frozen=True)
class Generator:
    id: str
    bus_id: str
    p_min: float
    p_max: float
    reg_up_cap: float
    reg_dn_cap: float
    sr_cap: float
    rur: float  # ramp-up limit per AGC sub-interval, MW
    rdr: float
    # convex piecewise-linear cost: (segment start MW, slope $/MW); first start is 0
    cost_segments: tuple[tuple[float, float], ...]
    cp: float  # $/MW penalty on governor-law slack
    k_gain: float

    def cost(self, p: float) -> float:
        """Generation cost at output ``p`` (zero at ``p = 0``)."""
        total = 0.0
        starts = [s for s, _ in self.cost_segments] + [np.inf]
        for k, (start, slope) in enumerate(self.cost_segments):
            if p <= start:
                break
            total += slope * (min(p, starts[k + 1]) - start)
        return total

    def cost_pieces(self) -> list[tuple[float, float]]:
        """Affine pieces ``(slope, intercept)`` whose maximum is the cost."""
        pieces = []
        for start, slope in self.cost_segments:
            pieces.append((slope, self.cost(start) - slope * start))
        return pieces


@dataclass(frozen=True)
class Line:
    id: str
    capacity: float
    shift_factors: dict  # bus id -> SF_{b,l}


@dataclass(frozen=True)
class ReserveRequirements:
    sr_min: float = 0.0
    reg_min_up: float = 0.0
    reg_min_dn: float = 0.0


@dataclass(frozen=True)
class AgcDynamics:
    """Discrete AGC recursion coefficients.

    ``alpha[i, n]`` multiplies ``dpM[i, t]`` in the update of ``dpM[n, t+1]``;
    ``tau_coef[i]`` multiplies ``dpGV[i, t]`` in the frequency update.
    """

    n_sub_intervals: int
    dt: float
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    zeta: np.ndarray
    kappa: np.ndarray
    tau_coef: np.ndarray
    rho: float
    eta: float
    k_gain: np.ndarray
    freq_min: np.ndarray  # per sub-interval, Hz
    freq_max: np.ndarray
    warnings: tuple[str, ...] = ()

    @property
    def n_generators(self) -> int:
        return int(np.asarray(self.gamma).size)

    def state_matrices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Recursion as ``s_{t+1} = F s_t + G gv_t + h dd_t`` with ``s = (dpM, dw)``."""
        g = self.n_generators
        F = np.zeros((g + 1, g + 1))
        F[:g, :g] = np.asarray(self.alpha).T
        F[:g, g] = self.gamma
        F[g, :g] = self.kappa
        F[g, g] = self.rho
        G = np.zeros((g + 1, g))
        G[:g, :] = np.asarray(self.beta).T
        G[g, :] = self.tau_coef
        h = np.append(np.asarray(self.zeta, dtype=float), self.eta)
        return F, G, h


@dataclass(frozen=True)
class UncertaintyModel:
    d_bar: np.ndarray
    d_hat: np.ndarray
    delta_d_bar: np.ndarray
    delta_d_hat: np.ndarray

    @property
    def n_buses(self) -> int:
        return self.d_bar.size

    @property
    def n_sub(self) -> int:
        return self.delta_d_bar.size

    @property
    def dim(self) -> int:
        return 2 * (self.n_buses + self.n_sub)

    @classmethod
    def from_buses(cls, buses: Sequence[Bus], delta_d_bar, delta_d_hat) -> "UncertaintyModel":
        return cls(
            np.array([b.d_bar for b in buses], dtype=float),
            np.array([b.d_hat for b in buses], dtype=float),
            np.asarray(delta_d_bar, dtype=float).ravel(),
            np.asarray(delta_d_hat, dtype=float).ravel(),
        )

    def realization(self, lam: "ScaleVector", up_b, up_t) -> tuple[np.ndarray, np.ndarray]:
        """Vertex of the scaled box picked by boolean direction masks."""
        up_b = np.asarray(up_b, dtype=bool)
        up_t = np.asarray(up_t, dtype=bool)
        d = self.d_bar + np.where(up_b, lam.up_b * self.d_hat, -lam.dn_b * self.d_hat)
        dd = self.delta_d_bar + np.where(up_t, lam.up_t * self.delta_d_hat,
                                         -lam.dn_t * self.delta_d_hat)
        return d, dd


@dataclass(frozen=True)
class ScaleVector:
    """Scales of the load-deviation ranges.

    The canonical flat ordering interleaves up/down per bus, then per
    sub-interval: ``(up_b1, dn_b1, up_b2, dn_b2, ..., up_t1, dn_t1, ...)``.
    """

    up_b: np.ndarray
    dn_b: np.ndarray
    up_t: np.ndarray
    dn_t: np.ndarray

    def __post_init__(self):
        for name in ("up_b", "dn_b", "up_t", "dn_t"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).ravel())
        if self.up_b.size != self.dn_b.size or self.up_t.size != self.dn_t.size:
            raise ValueError("up/down scale vectors differ in length")

    @classmethod
    def zeros(cls, n_buses: int, n_sub: int) -> "ScaleVector":
        return cls(np.zeros(n_buses), np.zeros(n_buses), np.zeros(n_sub), np.zeros(n_sub))

    @classmethod
    def full(cls, n_buses: int, n_sub: int, value: float = 1.0) -> "ScaleVector":
        return cls(np.full(n_buses, value), np.full(n_buses, value),
                   np.full(n_sub, value), np.full(n_sub, value))

    @classmethod
    def from_array(cls, vec, n_buses: int, n_sub: int) -> "ScaleVector":
        vec = np.asarray(vec, dtype=float).ravel()
        if vec.size != 2 * (n_buses + n_sub):
            raise ValueError(f"expected {2 * (n_buses + n_sub)} scales, got {vec.size}")
        bus = vec[: 2 * n_buses].reshape(n_buses, 2)
        sub = vec[2 * n_buses:].reshape(n_sub, 2)
        return cls(bus[:, 0], bus[:, 1], sub[:, 0], sub[:, 1])

    def as_array(self) -> np.ndarray:
        bus = np.column_stack((self.up_b, self.dn_b)).ravel()
        sub = np.column_stack((self.up_t, self.dn_t)).ravel()
        return np.concatenate((bus, sub))

    @property
    def n_buses(self) -> int:
        return self.up_b.size

    @property
    def n_sub(self) -> int:
        return self.up_t.size

    def in_unit_box(self, tol: float = 0.0) -> bool:
        v = self.as_array()
        return bool(np.all(v >= -tol) and np.all(v <= 1 + tol))


@dataclass(frozen=True)
class SystemCase:
    buses: tuple[Bus, ...]
    generators: tuple[Generator, ...]
    lines: tuple[Line, ...]
    reserves: ReserveRequirements
    agc: AgcDynamics
    uncertainty: UncertaintyModel
    budget: float
    name: str = "case"

    @property
    def bus_index(self) -> dict[str, int]:
        return {b.id: i for i, b in enumerate(self.buses)}

    def generators_at(self, bus_id: str) -> list[int]:
        return [k for k, g in enumerate(self.generators) if g.bus_id == bus_id]

    def shift_factor_matrix(self) -> np.ndarray:
        """``SF[l, b]`` as a dense |L| x |B| array."""
        return np.array([[ln.shift_factors[b.id] for b in self.buses] for ln in self.lines],
                        dtype=float).reshape(len(self.lines), len(self.buses))


@dataclass(frozen=True)
class FlexIndices:
    tf: float
    edf: float
    agcf: float
    edupf: float
    eddnf: float
    agcupf: float
    agcdnf: float

    FIELDS = ("tf", "edf", "agcf", "edupf", "eddnf", "agcupf", "agcdnf")

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, f) for f in self.FIELDS)


@dataclass
class FlexReport:
    indices: FlexIndices
    lambda_star: ScaleVector
    iterations: int
    cuts: list = field(default_factory=list)
    trace: list = field(default_factory=list)

    def __getattr__(self, name):
        if name in FlexIndices.FIELDS:
            return getattr(self.indices, name)
        raise AttributeError(name)


# -- operations ---------------------------------------------------------------

def validate_case(case: SystemCase) -> list[str]:
    """Return human-readable invariant violations; empty means valid."""
    out: list[str] = []
    bus_ids = [b.id for b in case.buses]
    if len(set(bus_ids)) != len(bus_ids):
        out.append("duplicate bus ids")
    for b in case.buses:
        if b.d_bar < 0:
            out.append(f"bus {b.id}: negative nominal load")
        if b.d_hat < 0:
            out.append(f"bus {b.id}: negative load deviation")
    known = set(bus_ids)
    for g in case.generators:
        if g.bus_id not in known:
            out.append(f"generator {g.id}: unknown bus {g.bus_id}")
        if g.p_min > g.p_max:
            out.append(f"generator {g.id}: p_min > p_max")
        for cap in ("reg_up_cap", "reg_dn_cap", "sr_cap", "rur", "rdr", "cp"):
            if getattr(g, cap) < 0:
                out.append(f"generator {g.id}: negative {cap}")
        segs = g.cost_segments
        if not segs:
            out.append(f"generator {g.id}: empty cost curve")
        else:
            starts = [s for s, _ in segs]
            slopes = [c for _, c in segs]
            if starts[0] != 0 or any(b <= a for a, b in zip(starts, starts[1:])):
                out.append(f"generator {g.id}: cost segments must start at 0 and increase")
            if any(c < 0 for c in slopes) or any(b < a for a, b in zip(slopes, slopes[1:])):
                out.append(f"generator {g.id}: cost slopes must be nonnegative and nondecreasing")
    for ln in case.lines:
        if ln.capacity <= 0:
            out.append(f"line {ln.id}: capacity must be positive")
        missing = known - set(ln.shift_factors)
        extra = set(ln.shift_factors) - known
        if missing or extra:
            out.append(f"line {ln.id}: shift factors do not cover the bus set "
                       f"(missing {sorted(missing)}, unknown {sorted(extra)})")
    r = case.reserves
    if min(r.sr_min, r.reg_min_up, r.reg_min_dn) < 0:
        out.append("reserve requirements must be nonnegative")
    if case.budget < 0:
        out.append("budget must be nonnegative")
    out.extend(_validate_agc(case))
    u = case.uncertainty
    if u.n_buses != len(case.buses):
        out.append("uncertainty model bus count differs from bus list")
    elif not (np.allclose(u.d_bar, [b.d_bar for b in case.buses])
              and np.allclose(u.d_hat, [b.d_hat for b in case.buses])):
        out.append("uncertainty model disagrees with bus load data")
    if u.n_sub != case.agc.n_sub_intervals:
        out.append("uncertainty model sub-interval count differs from AGC horizon")
    if np.any(u.delta_d_hat < 0):
        out.append("negative disturbance deviation")
    return out


def _validate_agc(case: SystemCase) -> list[str]:
    out = []
    a = case.agc
    g = len(case.generators)
    if a.n_sub_intervals < 1:
        out.append("AGC horizon must have at least one sub-interval")
    if a.dt <= 0:
        out.append("AGC dt must be positive")
    for name in ("alpha", "beta"):
        if np.shape(getattr(a, name)) != (g, g):
            out.append(f"AGC {name} must be {g}x{g}")
    for name in ("gamma", "zeta", "kappa", "tau_coef", "k_gain"):
        if np.shape(getattr(a, name)) != (g,):
            out.append(f"AGC {name} must have {g} entries")
    if np.shape(a.k_gain) == (g,) and not np.allclose(a.k_gain, [gen.k_gain for gen in case.generators]):
        out.append("AGC k_gain disagrees with generator data")
    for name in ("freq_min", "freq_max"):
        if np.shape(getattr(a, name)) != (a.n_sub_intervals,):
            out.append(f"AGC {name} must have one entry per sub-interval")
    if np.shape(a.freq_min) == np.shape(a.freq_max) and (
            np.any(np.asarray(a.freq_min) > 0) or np.any(np.asarray(a.freq_max) < 0)):
        out.append("frequency bounds must bracket zero")
    return out


def objective_coefficients(u: UncertaintyModel) -> np.ndarray:
    """Weights ``a`` with ``a @ lam.as_array()`` equal to total flexibility."""
    bus = np.repeat(u.d_hat, 2)
    sub = np.repeat(u.delta_d_hat, 2)
    return np.concatenate((bus, sub))


def compute_indices(lam: ScaleVector, u: UncertaintyModel) -> FlexIndices:
    if lam.n_buses != u.n_buses or lam.n_sub != u.n_sub:
        raise ValueError("scale vector dimensions do not match the uncertainty model")
    edupf = float(u.d_hat @ lam.up_b)
    eddnf = float(u.d_hat @ lam.dn_b)
    agcupf = float(u.delta_d_hat @ lam.up_t)
    agcdnf = float(u.delta_d_hat @ lam.dn_t)
    edf = edupf + eddnf
    agcf = agcupf + agcdnf
    return FlexIndices(edf + agcf, edf, agcf, edupf, eddnf, agcupf, agcdnf)

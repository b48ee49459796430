"""YAML case files.

A case file is a mapping with these keys (``schema_version: 1``)::

    schema_version: 1
    name: two-bus example
    budget: 5000                 # $, or {nominal_scale: 1.2} for 1.2 x nominal ED cost
    buses:
      - {id: b1, d_bar: 100}     # d_hat optional when uncertainty.d_hat_fraction is set
    generators:
      - id: g1
        bus: b1
        p_min: 0
        p_max: 150
        reg_up_cap: 10
        reg_dn_cap: 10
        sr_cap: 20
        rur: 8                   # MW per AGC sub-interval
        rdr: 8
        cost: [[0, 20], [80, 30]]    # (segment start MW, slope $/MW)
        cp: 100                  # $/MW on governor-law slack
        t_ch: 5.0                # continuous AGC data (agc.model: continuous), s
        t_g: 2.0
        droop: 1.0               # Hz/MW
    lines:
      - id: l1
        capacity: 40
        shift_factors: {b1: 0.0, b2: -0.5}
      # or derive them: {id: l1, from: b1, to: b2, reactance: 0.1, capacity: 40}
    network: {slack: b1}         # needed only when some line gives a reactance
    reserves: {sr_min: 10, reg_min_up: 5, reg_min_dn: 5}
    uncertainty:
      d_hat_fraction: 0.15       # d_hat = 0.15 * d_bar where a bus gives none
      delta_d_bar: 0.0           # scalar or one value per sub-interval
      delta_d_hat: 2.0
    agc:
      n_sub_intervals: 10
      dt: 4.0
      freq_min: -0.05            # scalar or one value per sub-interval
      freq_max: 0.05
      model: continuous          # or: raw
      inertia: 20
      damping: 2
      # raw: give alpha, beta, gamma, zeta, kappa, tau_coef, rho, eta, k_gain

Any error is reported as a CaseParseError naming the field and, where the
YAML parser knows it, the line number.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from .agc import ContinuousAgcModel, DimensionError, pass_through, zoh_discretize
from .model import (AgcDynamics, Bus, Generator, Line, ReserveRequirements, SystemCase,
                    UncertaintyModel, validate_case)

SCHEMA_VERSION = 1
DEFAULT_T = 10
DEFAULT_DT = 4.0


class CaseParseError(ValueError):
    pass


class _Map(dict):
    line: int | None = None


class _Loader(yaml.SafeLoader):
    pass


def _construct_map(loader, node):
    out = _Map(loader.construct_mapping(node, deep=True))
    out.line = node.start_mark.line + 1
    return out


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_map)


def _where(obj, what: str) -> str:
    line = getattr(obj, "line", None)
    return f"{what} (line {line})" if line else what


def _get(obj, key, what, default=..., kind=float):
    if not isinstance(obj, dict):
        raise CaseParseError(f"{what}: expected a mapping")
    if key not in obj:
        if default is ...:
            raise CaseParseError(f"{_where(obj, what)}: missing field '{key}'")
        return default
    val = obj[key]
    if kind is float:
        try:
            out = float(val)
        except (TypeError, ValueError):
            raise CaseParseError(f"{_where(obj, what)}: field '{key}' must be a number, got {val!r}") from None
        if not np.isfinite(out):
            raise CaseParseError(f"{_where(obj, what)}: field '{key}' must be finite")
        return out
    if kind is str:
        return str(val)
    return val


def _series(obj, key, what, n, default):
    raw = obj.get(key, default) if isinstance(obj, dict) else default
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise CaseParseError(f"{_where(obj, what)}: '{key}' must be a number or a list of numbers") from None
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise CaseParseError(f"{_where(obj, what)}: '{key}' needs {n} values, got {arr.size}")
    return arr.copy()


def load_case(path) -> SystemCase:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CaseParseError(f"cannot read {path}: {exc}") from exc
    try:
        doc = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise CaseParseError(f"{path}: YAML syntax error: {exc}") from exc
    return case_from_dict(doc, source=str(path))


def case_from_dict(doc, source: str = "<case>") -> SystemCase:
    """Build and validate a SystemCase from a parsed case document."""
    if not isinstance(doc, dict):
        raise CaseParseError(f"{source}: top level must be a mapping")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise CaseParseError(f"{source}: unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")

    unc = doc.get("uncertainty", {}) or {}
    frac = unc.get("d_hat_fraction")
    buses = []
    for k, raw in enumerate(_list(doc, "buses", source)):
        what = f"bus #{k + 1}"
        bid = _get(raw, "id", what, kind=str)
        what = f"bus {bid}"
        d_bar = _get(raw, "d_bar", what)
        if "d_hat" in raw:
            d_hat = _get(raw, "d_hat", what)
        elif frac is not None:
            d_hat = float(frac) * d_bar
        else:
            raise CaseParseError(f"{_where(raw, what)}: no d_hat and no uncertainty.d_hat_fraction")
        buses.append(Bus(bid, d_bar, d_hat))
    bus_ids = [b.id for b in buses]

    agc_doc = doc.get("agc", {}) or {}
    T = int(_get(agc_doc, "n_sub_intervals", "agc", DEFAULT_T))
    dt = _get(agc_doc, "dt", "agc", DEFAULT_DT)
    if T < 1:
        raise CaseParseError("agc: n_sub_intervals must be at least 1")
    mode = str(agc_doc.get("model", "continuous"))

    gen_docs = _list(doc, "generators", source)
    gen_ids = []
    for k, raw in enumerate(gen_docs):
        gen_ids.append(_get(raw, "id", f"generator #{k + 1}", kind=str))
    freq_min = _series(agc_doc, "freq_min", "agc", T, -0.05)
    freq_max = _series(agc_doc, "freq_max", "agc", T, 0.05)
    if mode == "continuous":
        try:
            cont = ContinuousAgcModel(
                t_ch=[_get(g, "t_ch", f"generator {i}") for g, i in zip(gen_docs, gen_ids)],
                t_g=[_get(g, "t_g", f"generator {i}") for g, i in zip(gen_docs, gen_ids)],
                droop=[_get(g, "droop", f"generator {i}") for g, i in zip(gen_docs, gen_ids)],
                inertia=_get(agc_doc, "inertia", "agc"),
                damping=_get(agc_doc, "damping", "agc"),
                dt=dt, n_sub_intervals=T, freq_min=freq_min, freq_max=freq_max)
        except (ValueError, DimensionError) as exc:
            if isinstance(exc, CaseParseError):
                raise
            raise CaseParseError(f"{_where(agc_doc, 'agc')}: {exc}") from exc
        agc = zoh_discretize(cont)
    elif mode == "raw":
        agc = _raw_agc(agc_doc, len(gen_docs), T, dt, freq_min, freq_max)
    else:
        raise CaseParseError(f"{_where(agc_doc, 'agc')}: model must be 'continuous' or 'raw', got {mode!r}")

    generators = []
    for n, (raw, gid) in enumerate(zip(gen_docs, gen_ids)):
        what = f"generator {gid}"
        generators.append(Generator(
            id=gid,
            bus_id=_get(raw, "bus", what, kind=str),
            p_min=_get(raw, "p_min", what, 0.0),
            p_max=_get(raw, "p_max", what),
            reg_up_cap=_get(raw, "reg_up_cap", what, 0.0),
            reg_dn_cap=_get(raw, "reg_dn_cap", what, 0.0),
            sr_cap=_get(raw, "sr_cap", what, 0.0),
            rur=_get(raw, "rur", what),
            rdr=_get(raw, "rdr", what),
            cost_segments=_cost(raw, what),
            cp=_get(raw, "cp", what),
            k_gain=float(agc.k_gain[n]),
        ))

    lines = _lines(doc, bus_ids, source)

    res_doc = doc.get("reserves", {}) or {}
    reserves = ReserveRequirements(
        _get(res_doc, "sr_min", "reserves", 0.0),
        _get(res_doc, "reg_min_up", "reserves", 0.0),
        _get(res_doc, "reg_min_dn", "reserves", 0.0),
    )
    uncertainty = UncertaintyModel.from_buses(
        buses, _series(unc, "delta_d_bar", "uncertainty", T, 0.0),
        _series(unc, "delta_d_hat", "uncertainty", T, 0.0))

    budget_raw = doc.get("budget")
    name = str(doc.get("name", Path(source).stem))
    case = SystemCase(tuple(buses), tuple(generators), tuple(lines), reserves, agc, uncertainty,
                      budget=0.0, name=name)
    if isinstance(budget_raw, dict) and "nominal_scale" in budget_raw:
        from .benders import nominal_dispatch_cost

        scale = _get(budget_raw, "nominal_scale", "budget")
        _check(case, source)
        budget = scale * nominal_dispatch_cost(case)
    elif budget_raw is None:
        raise CaseParseError(f"{source}: missing field 'budget'")
    else:
        budget = _get(doc, "budget", source)
    case = SystemCase(case.buses, case.generators, case.lines, reserves, agc, uncertainty,
                      budget=budget, name=name)
    _check(case, source)
    return case


def _check(case: SystemCase, source: str) -> None:
    problems = validate_case(case)
    if problems:
        raise CaseParseError(f"{source}: invalid case: " + "; ".join(problems))


def _list(doc, key, source):
    val = doc.get(key)
    if key == "lines" and val is None:
        return []
    if not isinstance(val, list) or (key != "lines" and not val):
        raise CaseParseError(f"{source}: '{key}' must be a non-empty list")
    return val


def _cost(raw, what):
    segs = raw.get("cost") if isinstance(raw, dict) else None
    if segs is None:
        raise CaseParseError(f"{_where(raw, what)}: missing field 'cost'")
    try:
        pairs = tuple((float(s), float(c)) for s, c in segs)
    except (TypeError, ValueError):
        raise CaseParseError(f"{_where(raw, what)}: 'cost' must be a list of [start, slope] pairs") from None
    if not pairs:
        raise CaseParseError(f"{_where(raw, what)}: 'cost' is empty")
    return pairs


def _lines(doc, bus_ids, source):
    docs = _list(doc, "lines", source)
    need_ptdf = [raw for raw in docs if isinstance(raw, dict) and "shift_factors" not in raw]
    derived = {}
    if need_ptdf:
        net = doc.get("network", {}) or {}
        slack = net.get("slack")
        if slack not in bus_ids:
            raise CaseParseError(f"{source}: lines without shift_factors need network.slack naming a bus")
        branches = []
        for raw in need_ptdf:
            lid = _get(raw, "id", "line", kind=str)
            fb, tb = _get(raw, "from", f"line {lid}", kind=str), _get(raw, "to", f"line {lid}", kind=str)
            if fb not in bus_ids or tb not in bus_ids:
                raise CaseParseError(f"{_where(raw, f'line {lid}')}: unknown terminal bus")
            branches.append((lid, fb, tb, _get(raw, "reactance", f"line {lid}")))
        all_branches = branches + [(str(r.get("id")), r.get("from"), r.get("to"), float(r["reactance"]))
                                   for r in docs if "shift_factors" in r and "reactance" in r]
        derived = ptdf(bus_ids, all_branches, slack)
    lines = []
    for k, raw in enumerate(docs):
        lid = _get(raw, "id", f"line #{k + 1}", kind=str)
        what = f"line {lid}"
        cap = _get(raw, "capacity", what)
        if "shift_factors" in raw:
            sf = raw["shift_factors"]
            if isinstance(sf, list):
                if len(sf) != len(bus_ids):
                    raise CaseParseError(
                        f"{_where(raw, what)}: shift-factor row has {len(sf)} entries for {len(bus_ids)} buses")
                sf = dict(zip(bus_ids, sf))
            if not isinstance(sf, dict):
                raise CaseParseError(f"{_where(raw, what)}: malformed shift-factor row")
            try:
                sf = {str(b): float(v) for b, v in sf.items()}
            except (TypeError, ValueError):
                raise CaseParseError(f"{_where(raw, what)}: malformed shift-factor row (non-numeric entry)") from None
            missing = set(bus_ids) - set(sf)
            extra = set(sf) - set(bus_ids)
            if missing or extra:
                raise CaseParseError(f"{_where(raw, what)}: malformed shift-factor row "
                                     f"(missing {sorted(missing)}, unknown {sorted(extra)})")
        else:
            sf = derived[lid]
        lines.append(Line(lid, cap, sf))
    return lines


def ptdf(bus_ids, branches, slack) -> dict[str, dict[str, float]]:
    """DC shift factors for ``branches = [(id, from, to, reactance)]``.

    Injection at bus b withdrawn at ``slack``; flow positive from -> to.
    """
    idx = {b: i for i, b in enumerate(bus_ids)}
    n = len(bus_ids)
    Bbus = np.zeros((n, n))
    for _, fb, tb, x in branches:
        if x <= 0:
            raise CaseParseError("line reactance must be positive")
        i, j = idx[fb], idx[tb]
        Bbus[i, i] += 1 / x
        Bbus[j, j] += 1 / x
        Bbus[i, j] -= 1 / x
        Bbus[j, i] -= 1 / x
    keep = [i for i in range(n) if i != idx[slack]]
    X = np.zeros((n, n))
    try:
        X[np.ix_(keep, keep)] = np.linalg.inv(Bbus[np.ix_(keep, keep)])
    except np.linalg.LinAlgError:
        raise CaseParseError("network is disconnected; shift factors undefined") from None
    out = {}
    for lid, fb, tb, x in branches:
        row = (X[idx[fb]] - X[idx[tb]]) / x
        out[lid] = {b: float(row[idx[b]]) for b in bus_ids}
    return out


def _raw_agc(agc_doc, g, T, dt, freq_min, freq_max) -> AgcDynamics:
    def arr(key, shape):
        if key not in agc_doc:
            raise CaseParseError(f"{_where(agc_doc, 'agc')}: raw model needs '{key}'")
        try:
            val = np.asarray(agc_doc[key], dtype=float)
        except (TypeError, ValueError):
            raise CaseParseError(f"{_where(agc_doc, 'agc')}: '{key}' is not numeric") from None
        if val.shape != shape:
            raise CaseParseError(f"{_where(agc_doc, 'agc')}: '{key}' must have shape {shape}, got {val.shape}")
        return val

    raw = AgcDynamics(
        n_sub_intervals=T, dt=dt,
        alpha=arr("alpha", (g, g)), beta=arr("beta", (g, g)), gamma=arr("gamma", (g,)),
        zeta=arr("zeta", (g,)), kappa=arr("kappa", (g,)), tau_coef=arr("tau_coef", (g,)),
        rho=float(arr("rho", ())), eta=float(arr("eta", ())), k_gain=arr("k_gain", (g,)),
        freq_min=freq_min, freq_max=freq_max)
    return pass_through(raw)


def case_to_dict(case: SystemCase) -> dict:
    """Raw-AGC document reproducing ``case`` exactly (used for dumps and tests)."""
    agc = case.agc
    return {
        "schema_version": SCHEMA_VERSION,
        "name": case.name,
        "budget": float(case.budget),
        "buses": [{"id": b.id, "d_bar": b.d_bar, "d_hat": b.d_hat} for b in case.buses],
        "generators": [{
            "id": g.id, "bus": g.bus_id, "p_min": g.p_min, "p_max": g.p_max,
            "reg_up_cap": g.reg_up_cap, "reg_dn_cap": g.reg_dn_cap, "sr_cap": g.sr_cap,
            "rur": g.rur, "rdr": g.rdr, "cost": [list(s) for s in g.cost_segments], "cp": g.cp,
        } for g in case.generators],
        "lines": [{"id": ln.id, "capacity": ln.capacity, "shift_factors": dict(ln.shift_factors)}
                  for ln in case.lines],
        "reserves": {"sr_min": case.reserves.sr_min, "reg_min_up": case.reserves.reg_min_up,
                     "reg_min_dn": case.reserves.reg_min_dn},
        "uncertainty": {"delta_d_bar": case.uncertainty.delta_d_bar.tolist(),
                        "delta_d_hat": case.uncertainty.delta_d_hat.tolist()},
        "agc": {
            "model": "raw", "n_sub_intervals": agc.n_sub_intervals, "dt": agc.dt,
            "freq_min": np.asarray(agc.freq_min).tolist(), "freq_max": np.asarray(agc.freq_max).tolist(),
            "alpha": np.asarray(agc.alpha).tolist(), "beta": np.asarray(agc.beta).tolist(),
            "gamma": np.asarray(agc.gamma).tolist(), "zeta": np.asarray(agc.zeta).tolist(),
            "kappa": np.asarray(agc.kappa).tolist(), "tau_coef": np.asarray(agc.tau_coef).tolist(),
            "rho": float(agc.rho), "eta": float(agc.eta), "k_gain": np.asarray(agc.k_gain).tolist(),
        },
    }

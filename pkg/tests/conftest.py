"""Shared fixtures: bundled cases, small synthetic cases and a HiGHS cross-check."""

from __future__ import annotations

from importlib.resources import files
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import linprog

from flexgauge.casefile import case_from_dict, load_case

CASES = Path(str(files("flexgauge") / "cases"))
DESK = sorted((CASES / "desk").glob("*.yaml"))


def case_path(name: str) -> Path:
    return CASES / name


def gen_doc(gid, bus, p_max=150.0, **kw):
    doc = {"id": gid, "bus": bus, "p_min": 0.0, "p_max": p_max, "reg_up_cap": 10.0,
           "reg_dn_cap": 10.0, "sr_cap": 20.0, "rur": 8.0, "rdr": 8.0,
           "cost": [[0, 20.0]], "cp": 100.0, "t_ch": 5.0, "t_g": 2.0, "droop": 1.0}
    doc.update(kw)
    return doc


def base_doc(T=1, n_gen=1, loads=(100.0,), lines=(), **kw):
    buses = [{"id": f"b{k + 1}", "d_bar": d} for k, d in enumerate(loads)]
    doc = {
        "schema_version": 1, "name": "tiny", "budget": 1e6,
        "buses": buses,
        "generators": [gen_doc(f"g{k + 1}", buses[k % len(buses)]["id"]) for k in range(n_gen)],
        "lines": list(lines),
        "reserves": {"sr_min": 0.0, "reg_min_up": 0.0, "reg_min_dn": 0.0},
        "uncertainty": {"d_hat_fraction": 0.1, "delta_d_bar": 0.0, "delta_d_hat": 1.0},
        "agc": {"n_sub_intervals": T, "dt": 4.0, "freq_min": -0.2, "freq_max": 0.2,
                "model": "continuous", "inertia": 30.0, "damping": 2.0},
    }
    doc.update(kw)
    return doc


def tiny_case(**kw):
    return case_from_dict(base_doc(**kw), "<tiny>")


def random_case_doc(rng: np.random.Generator, n_bus: int, n_gen: int, n_line: int, T: int) -> dict:
    """Random connected system; not necessarily nominally feasible."""
    bus_ids = [f"b{k + 1}" for k in range(n_bus)]
    loads = rng.uniform(30, 120, n_bus).round(1)
    gens = []
    for k in range(n_gen):
        pm = float(rng.uniform(0.6, 1.2) * loads.sum())
        gens.append(gen_doc(f"g{k + 1}", bus_ids[k % n_bus], p_max=round(pm, 1),
                            p_min=round(float(rng.uniform(0, 10)), 1),
                            reg_up_cap=round(float(rng.uniform(0, 8)), 1),
                            reg_dn_cap=round(float(rng.uniform(0, 8)), 1),
                            rur=round(float(rng.uniform(0.2, 3)), 2),
                            rdr=round(float(rng.uniform(0.2, 3)), 2),
                            cost=[[0, round(float(rng.uniform(10, 40)), 1)]],
                            cp=round(float(rng.uniform(50, 150)), 1),
                            t_ch=round(float(rng.uniform(4, 7)), 2),
                            droop=round(float(rng.uniform(1, 2)), 2)))
    pairs = [(k, k + 1) for k in range(n_bus - 1)] + [(0, n_bus - 1)]
    lines = []
    n_line = max(n_line, n_bus - 1)  # keep the network connected
    for k in range(min(n_line, len(pairs) if n_bus > 2 else n_bus - 1)):
        i, j = pairs[k]
        lines.append({"id": f"l{k + 1}", "from": bus_ids[i], "to": bus_ids[j],
                      "reactance": round(float(rng.uniform(0.05, 0.2)), 3),
                      "capacity": round(float(rng.uniform(20, 80)), 1)})
    doc = base_doc(T=T, loads=tuple(loads), lines=lines)
    doc["generators"] = gens
    doc["budget"] = round(float(rng.uniform(0.8, 1.5) * loads.sum() * 30), 1)
    doc["uncertainty"]["d_hat_fraction"] = round(float(rng.uniform(0.05, 0.3)), 3)
    doc["uncertainty"]["delta_d_hat"] = round(float(rng.uniform(0.5, 3)), 2)
    doc["agc"]["freq_min"], doc["agc"]["freq_max"] = -0.1, 0.1
    if lines:
        doc["network"] = {"slack": "b1"}
    return doc


def highs_lp(c, A, senses, b, lb, ub, maximize=False) -> float:
    """Optimal value from scipy's HiGHS, used as an independent reference."""
    c = np.asarray(c, float)
    A = np.asarray(A, float)
    senses = np.asarray(senses)
    le, eq, ge = senses == "<", senses == "=", senses == ">"
    A_ub = np.vstack((A[le], -A[ge]))
    b_ub = np.concatenate((b[le], -b[ge]))
    res = linprog(-c if maximize else c, A_ub=A_ub if A_ub.size else None,
                  b_ub=b_ub if A_ub.size else None,
                  A_eq=A[eq] if eq.any() else None, b_eq=b[eq] if eq.any() else None,
                  bounds=list(zip([None if np.isinf(v) else v for v in lb],
                                  [None if np.isinf(v) else v for v in ub])),
                  method="highs")
    if res.status != 0:
        raise RuntimeError(f"HiGHS status {res.status}: {res.message}")
    return -res.fun if maximize else res.fun


def highs_value(lp) -> float:
    return highs_lp(lp.c, lp.A, lp.senses, lp.b, lp.lb, lp.ub, lp.maximize)


@pytest.fixture(scope="session")
def two_bus():
    return load_case(case_path("two_bus.yaml"))


@pytest.fixture(scope="session")
def desk_cases():
    return [load_case(p) for p in DESK]


def pytest_terminal_summary(terminalreporter):
    import test_acceptance  # RESULTS stays empty unless the acceptance tests ran

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)

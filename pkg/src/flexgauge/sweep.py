"""Scale-factor sweeps over budget, ramp limits or line capacities."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

from .benders import BendersOptions, nominal_dispatch_cost, run_benders
from .errors import BaseInfeasibleError, IterationLimitError
from .model import FlexIndices, SystemCase

HEADER = ("SF", "TF", "EDF", "AGCF", "EDUPF", "EDDNF", "AGCUPF", "AGCDNF")
TARGETS = ("budget", "ramp", "line")


@dataclass(frozen=True)
class SweepSpec:
    target: str
    factors: tuple[float, ...]

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ValueError(f"sweep target must be one of {TARGETS}, got {self.target!r}")
        factors = tuple(float(f) for f in self.factors)
        if not factors:
            raise ValueError("at least one scale factor is needed")
        if any(not math.isfinite(f) or f <= 0 for f in factors):
            raise ValueError("scale factors must be positive")
        if any(b <= a for a, b in zip(factors, factors[1:])):
            raise ValueError("scale factors must be strictly ascending")
        object.__setattr__(self, "factors", factors)


@dataclass(frozen=True)
class SweepRow:
    sf: float
    indices: FlexIndices | None  # None when the point could not be solved
    status: str  # "ok", "base-infeasible" or "iteration-limit"
    iterations: int = 0
    budget: float | None = None


def scale_case(case: SystemCase, target: str, sf: float, base_budget: float | None = None) -> SystemCase:
    """Copy of ``case`` with one resource multiplied by ``sf``.

    The budget sweep scales ``base_budget`` (the nominal dispatch cost when
    not given) rather than the case's own budget.
    """
    if target == "budget":
        b0 = nominal_dispatch_cost(case) if base_budget is None else base_budget
        return replace(case, budget=sf * b0)
    if target == "ramp":
        gens = tuple(replace(g, rur=g.rur * sf, rdr=g.rdr * sf) for g in case.generators)
        return replace(case, generators=gens)
    if target == "line":
        lines = tuple(replace(ln, capacity=ln.capacity * sf) for ln in case.lines)
        return replace(case, lines=lines)
    raise ValueError(f"unknown sweep target {target!r}")


def run_sweep(case: SystemCase, spec: SweepSpec,
              options: BendersOptions = BendersOptions()) -> tuple[list[SweepRow], dict]:
    """One decomposition run per scale factor, in order.

    Unsolvable points are recorded and the sweep moves on. Returns the rows
    and a metadata dict.
    """
    meta = {"target": spec.target, "factors": list(spec.factors), "case": case.name}
    base_budget = None
    if spec.target == "budget":
        base_budget = nominal_dispatch_cost(case)
        meta["base_budget"] = base_budget
    rows = []
    for sf in spec.factors:
        scaled = scale_case(case, spec.target, sf, base_budget)
        try:
            rep = run_benders(scaled, options)
        except BaseInfeasibleError:
            rows.append(SweepRow(sf, None, "base-infeasible", 0, scaled.budget))
            continue
        except IterationLimitError as exc:
            rows.append(SweepRow(sf, None, "iteration-limit", exc.iterations, scaled.budget))
            continue
        rows.append(SweepRow(sf, rep.indices, "ok", rep.iterations, scaled.budget))
    return rows, meta


def _fmt(v: float) -> str:
    # repr is the shortest string that parses back to the same float
    return repr(float(v))


def emit_results(rows: list[SweepRow], out_dir, metadata: dict | None = None) -> list[Path]:
    """Write results.csv, one ``series_<INDEX>.txt`` per index and run.json."""
    if not rows:
        raise ValueError("nothing to write: the table is empty")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    path = out / "results.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for row in rows:
            vals = ["NA"] * 7 if row.indices is None else [_fmt(v) for v in row.indices.as_tuple()]
            w.writerow([_fmt(row.sf)] + vals)
    written.append(path)
    for k, name in enumerate(HEADER[1:]):
        path = out / f"series_{name}.txt"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# SF {name}\n")
            for row in rows:
                val = "NA" if row.indices is None else _fmt(row.indices.as_tuple()[k])
                fh.write(f"{_fmt(row.sf)} {val}\n")
        written.append(path)
    meta = dict(metadata or {})
    meta["rows"] = [{"SF": r.sf, "status": r.status, "iterations": r.iterations, "budget": r.budget}
                    for r in rows]
    path = out / "run.json"
    path.write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    written.append(path)
    return written


def read_results(path) -> list[tuple[float, FlexIndices | None]]:
    """Parse a results.csv back into ``(SF, indices)`` pairs."""
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != HEADER:
            raise ValueError(f"unexpected header {header}")
        for rec in reader:
            sf = float(rec[0])
            if all(v == "NA" for v in rec[1:]):
                out.append((sf, None))
            else:
                out.append((sf, FlexIndices(*(float(v) for v in rec[1:]))))
    return out

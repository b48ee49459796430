"""Command-line entry point: ``flexgauge solve | sweep | oracle``.

Exit codes: 0 success, 1 oracle disagreement, 2 parse or validation error,
3 nominal operation infeasible (solve), 4 iteration limit.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .benders import BendersOptions, build_rdfea, run_benders, solve_rdfea
from .casefile import CaseParseError, load_case
from .compact import assemble
from .errors import BaseInfeasibleError, IterationLimitError
from .model import ScaleVector
from .oracle import (EnumerationGuardError, FEASIBLE_TOL, lambda_grid, reference_flexibility,
                     worst_case_eta)
from .sweep import SweepRow, SweepSpec, emit_results, run_sweep

log = logging.getLogger("flexgauge")

EXIT_OK, EXIT_MISMATCH, EXIT_INPUT, EXIT_BASE_INFEASIBLE, EXIT_ITER_LIMIT = 0, 1, 2, 3, 4


def _factors(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.replace(" ", "").split(",") if tok)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad scale-factor list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flexgauge", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"flexgauge {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--case", required=True, type=Path, help="YAML case file")
        sp.add_argument("--out", required=True, type=Path, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="reserved; the algorithms are deterministic")

    s = sub.add_parser("solve", help="largest robustly feasible uncertainty box")
    common(s)
    s.add_argument("--tol", type=float, default=1e-6, help="feasibility tolerance on the subproblem value")
    s.add_argument("--max-iters", type=int, default=200)

    w = sub.add_parser("sweep", help="scale budget, ramp limits or line capacities")
    common(w)
    w.add_argument("--target", required=True, choices=("budget", "ramp", "line"))
    w.add_argument("--sf", required=True, type=_factors, help="comma-separated ascending scale factors")
    w.add_argument("--tol", type=float, default=1e-6)
    w.add_argument("--max-iters", type=int, default=200)

    o = sub.add_parser("oracle", help="cross-check the subproblem against vertex enumeration")
    common(o)
    o.add_argument("--lambda-grid", required=True, type=float, dest="step",
                   help="grid step for the scale levels, in (0, 1]")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        case = load_case(args.case)
    except CaseParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for msg in case.agc.warnings:
        log.warning("AGC coefficients: %s", msg)
    try:
        if args.command == "solve":
            return _solve(case, args)
        if args.command == "sweep":
            return _sweep(case, args)
        return _oracle(case, args)
    except (ValueError, EnumerationGuardError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def _options(args) -> BendersOptions:
    if args.tol <= 0 or args.max_iters < 1:
        raise ValueError("--tol must be positive and --max-iters at least 1")
    return BendersOptions(tol=args.tol, max_iters=args.max_iters)


def _solve(case, args) -> int:
    opts = _options(args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    meta = {"command": "solve", "case": case.name, "budget": case.budget,
            "options": {"tol": opts.tol, "max_iters": opts.max_iters,
                        "solver_tolerances": asdict(opts.solver_tol)}}
    try:
        rep = run_benders(case, opts)
    except BaseInfeasibleError as exc:
        print(f"base infeasible: {exc}", file=sys.stderr)
        emit_results([SweepRow(1.0, None, "base-infeasible", 0, case.budget)], out,
                     {**meta, "eta_nominal": exc.eta})
        return EXIT_BASE_INFEASIBLE
    except IterationLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        emit_results([SweepRow(1.0, None, "iteration-limit", exc.iterations, case.budget)], out, meta)
        if exc.report is not None:
            _write_report(exc.report, out / "report.json")
        return EXIT_ITER_LIMIT
    emit_results([SweepRow(1.0, rep.indices, "ok", rep.iterations, case.budget)], out, meta)
    _write_report(rep, out / "report.json")
    for name, val in zip(("TF", "EDF", "AGCF", "EDUPF", "EDDNF", "AGCUPF", "AGCDNF"), rep.indices.as_tuple()):
        print(f"{name:7s}{val:14.6f}")
    print(f"iterations {rep.iterations}")
    return EXIT_OK


def _write_report(rep, path: Path) -> None:
    doc = {
        "indices": dict(zip(rep.indices.FIELDS, rep.indices.as_tuple())),
        "lambda_star": rep.lambda_star.as_array().tolist(),
        "iterations": rep.iterations,
        "cuts": [{"iteration": c.iteration, "eta": c.eta, "constant": c.constant,
                  "coef": c.coef.tolist()} for c in rep.cuts],
        "trace": rep.trace,
    }
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _sweep(case, args) -> int:
    spec = SweepSpec(args.target, args.sf)
    opts = _options(args)
    rows, meta = run_sweep(case, spec, opts)
    meta.update({"command": "sweep", "options": {"tol": opts.tol, "max_iters": opts.max_iters,
                                                 "solver_tolerances": asdict(opts.solver_tol)}})
    emit_results(rows, args.out, meta)
    for row in rows:
        tf = "NA" if row.indices is None else f"{row.indices.tf:.6f}"
        print(f"SF {row.sf:g}: TF {tf} ({row.status})")
    return EXIT_ITER_LIMIT if any(r.status == "iteration-limit" for r in rows) else EXIT_OK


def _oracle(case, args) -> int:
    cf = assemble(case)
    u = case.uncertainty
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    worst = 0.0
    path = out / "oracle.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["point", "lambda", "eta_enumeration", "eta_subproblem", "abs_diff"])
        for k, vec in enumerate(lambda_grid(u.dim, args.step)):
            lam = ScaleVector.from_array(vec, u.n_buses, u.n_sub)
            e_or, _ = worst_case_eta(cf, u, lam)
            e_sub = solve_rdfea(build_rdfea(cf, u, lam)).eta
            diff = abs(e_or - e_sub)
            worst = max(worst, diff)
            w.writerow([k, " ".join(repr(float(v)) for v in vec), repr(e_or), repr(e_sub), repr(diff)])
    summary = {"case": case.name, "grid_step": args.step, "max_abs_diff": worst,
               "tolerance": FEASIBLE_TOL}
    try:
        s, flex = reference_flexibility(case, np.ones(u.dim), cf)
        rep = run_benders(case)
        e_star, _ = worst_case_eta(cf, u, rep.lambda_star)
        summary.update({"ray_scale": s, "ray_flexibility": flex, "benders_tf": rep.indices.tf,
                        "benders_lambda_eta": e_star})
    except BaseInfeasibleError as exc:
        summary["base_infeasible_eta"] = exc.eta
    summary["seconds"] = time.perf_counter() - start
    (out / "oracle_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                             encoding="utf-8")
    print(f"max |eta_enumeration - eta_subproblem| = {worst:.3e}")
    ok = worst <= FEASIBLE_TOL
    if "benders_tf" in summary:
        print(f"benders TF {summary['benders_tf']:.6f} vs uniform-ray {summary['ray_flexibility']:.6f}")
        ok = ok and summary["benders_lambda_eta"] <= FEASIBLE_TOL \
            and summary["benders_tf"] >= summary["ray_flexibility"] - 1e-4
    return EXIT_OK if ok else EXIT_MISMATCH


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

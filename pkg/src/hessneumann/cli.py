"""Batch command-line entry point.

Subcommands: verify-lemmas (inequality sweeps), solve (continuation solve of
a problem file), mms-study (manufactured-solution convergence study), and
sample-cone (emit cone samples).  Exit codes: 0 success, 1 mathematical
failure (violation or nonconvergence), 2 usage or validation error.  The
environment variable HN_THREADS caps sweep parallelism.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import fieldio
from .ellipticity import ConeSampler, SweepReport, default_sweep_plan, run_sweep
from .problem import ProblemFormatError, build_case, load_problem
from .solver import NewtonOptions, NonconvergenceError, continuation_solve, newton_solve
from .symfun import ConeError

__all__ = ["main", "entry"]

_EXACT_FLOOR = 1e-10  # errors below this are at stencil-exactness level
_MIN_ORDER = 1.7


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hessneumann", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-lemmas", help="run all inequality sweeps and write reports")
    p.add_argument("--n-max", type=int, default=6)
    p.add_argument("--samples", type=int, default=100000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--out", type=Path, default=Path("."))

    p = sub.add_parser("solve", help="continuation-solve a JSON problem file")
    p.add_argument("--problem", type=Path, required=True)
    p.add_argument("--out", type=Path, default=Path("."))
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--dump-field", action="store_true", help="also write the binary field dump")

    p = sub.add_parser("mms-study", help="manufactured-solution convergence study")
    p.add_argument("--case", required=True)
    p.add_argument("--grids", default="9,17,33", help="comma-separated m values")
    p.add_argument("--out", type=Path, default=Path("."))

    p = sub.add_parser("sample-cone", help="emit deterministic cone samples as CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--out", type=Path, default=None, help="output file (default stdout)")

    return parser


def _cmd_verify_lemmas(args) -> int:
    if args.samples <= 0:
        print("error: empty sweep (--samples must be positive)", file=sys.stderr)
        return 2
    if not 2 <= args.n_max <= 6:
        print("error: --n-max must be in [2, 6]", file=sys.stderr)
        return 2
    args.out.mkdir(parents=True, exist_ok=True)
    reports: list[SweepReport] = []
    for family, n, k, l in default_sweep_plan(args.n_max):
        rep = run_sweep(family, n, k, l, samples=args.samples, seed=args.seed, scale=args.scale)
        reports.append(rep)
        tag = f"{family}_n{n}_k{k}" + (f"_l{l}" if l is not None else "")
        (args.out / f"{tag}.json").write_text(rep.to_json() + "\n", encoding="utf-8")
        status = "ok" if rep.violations == 0 else f"{rep.violations} VIOLATIONS"
        print(f"{tag}: min_ratio={rep.min_ratio:.6g} [{status}]")

    summary = args.out / "summary.csv"
    with open(summary, "w", encoding="utf-8", newline="") as fh:
        fh.write(SweepReport.CSV_HEADER + "\n")
        for rep in reports:
            fh.write(rep.csv_row() + "\n")

    bad = [rep for rep in reports if rep.violations > 0]
    if bad:
        worst = bad[0]
        print(
            f"error: {len(bad)} sweep(s) with violations; first offender "
            f"{worst.label} n={worst.n} k={worst.k} l={worst.l} argmin={worst.argmin}",
            file=sys.stderr,
        )
        return 1
    print(f"all {len(reports)} sweeps clean; summary in {summary}")
    return 0


def _cmd_solve(args) -> int:
    try:
        spec = load_problem(args.problem)
    except FileNotFoundError:
        print(f"error: problem file not found: {args.problem}", file=sys.stderr)
        return 2
    except ProblemFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    args.out.mkdir(parents=True, exist_ok=True)
    opts = NewtonOptions(tol=args.tol, max_iter=args.max_iter)
    try:
        solution, report = continuation_solve(spec, opts=opts)
    except NonconvergenceError as exc:
        fieldio.write_report_json(args.out / "report.json", exc.report)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    fieldio.write_solution_csv(args.out / "solution.csv", solution)
    fieldio.write_report_json(args.out / "report.json", report)
    if args.dump_field:
        fieldio.write_field_binary(args.out / "solution.bin", solution)
    print(
        f"converged: residual={report.residual_norm:.3e} margin={report.final_margin:.3e} "
        f"stages={len(report.continuation)}"
    )
    return 0


def _cmd_mms_study(args) -> int:
    try:
        grids = [int(x) for x in args.grids.split(",") if x.strip()]
    except ValueError:
        print(f"error: bad --grids list: {args.grids!r}", file=sys.stderr)
        return 2
    if len(grids) < 2:
        print("error: need at least two grid sizes", file=sys.stderr)
        return 2
    args.out.mkdir(parents=True, exist_ok=True)

    rows = []
    prev = None
    for m in grids:
        try:
            spec, u_exact = build_case(args.case, m)
        except KeyError as exc:
            print(f"error: {exc.args[0]}", file=sys.stderr)
            return 2
        except (ValueError, ConeError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        try:
            solution, report = newton_solve(u_exact, spec)
        except NonconvergenceError as exc:
            print(f"error: m={m}: {exc}", file=sys.stderr)
            return 1
        if not report.converged:
            print(f"error: m={m}: Newton did not converge", file=sys.stderr)
            return 1
        err = float(np.abs(solution.values - u_exact.values).max())
        h = float(spec.grid.h.max())
        rows.append([m, h, err, None])
        if prev is not None:
            m0, h0, e0, _ = prev
            rows[-1][3] = math.log(e0 / err) / math.log(h0 / h) if err > 0 and e0 > 0 else float("inf")
        prev = rows[-1]

    exact = all(r[2] < _EXACT_FLOOR for r in rows)
    out_csv = args.out / f"mms_{args.case}.csv"
    with open(out_csv, "w", encoding="utf-8", newline="") as fh:
        fh.write("m,h,error_inf,observed_order\n")
        for m, h, err, order in rows:
            cell = "exact" if exact else ("" if order is None else f"{order:.6g}")
            fh.write(f"{m},{h:.17g},{err:.17g},{cell}\n")
    for m, h, err, order in rows:
        shown = "exact" if exact else ("-" if order is None else f"{order:.3f}")
        print(f"m={m:4d} h={h:.5g} err={err:.6e} order={shown}")

    if exact:
        print("errors at stencil-exactness level; study passes")
        return 0
    final_order = rows[-1][3]
    if final_order is not None and final_order >= _MIN_ORDER:
        print(f"final observed order {final_order:.3f} >= {_MIN_ORDER}")
        return 0
    print(f"error: final observed order {final_order} below {_MIN_ORDER}", file=sys.stderr)
    return 1


def _cmd_sample_cone(args) -> int:
    if args.count <= 0:
        print("error: --count must be positive", file=sys.stderr)
        return 2
    try:
        sampler = ConeSampler(args.n, args.k, args.seed, args.scale)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    eta = sampler.draw_batch(args.count)
    lines = ["index," + ",".join(f"eta{i + 1}" for i in range(args.n))]
    for i, row in enumerate(eta):
        lines.append(f"{i}," + ",".join(f"{v:.17g}" for v in row))
    text = "\n".join(lines) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text, encoding="utf-8")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    if args.command == "verify-lemmas":
        return _cmd_verify_lemmas(args)
    if args.command == "solve":
        return _cmd_solve(args)
    if args.command == "mms-study":
        return _cmd_mms_study(args)
    if args.command == "sample-cone":
        return _cmd_sample_cone(args)
    return 2


def entry() -> None:
    sys.exit(main())

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from typing import Any

from .bench import Bench, BenchConfig
from .config import FORMATS, ConfigValidationError, load_config, parse_overrides
from .datasets import (
    export_csv,
    inject_outliers,
    load_csv,
    mark_label_outliers,
    normalize_zscore,
)
from .oracle import SweepFamily, ratio_sweep
from .report import emit_report
from .theory import RootFindingError, ratio_table, solve_phi, solve_psi
from .utils import EventLog

# ConfigValidationError, ContractViolation, DatasetParseError and OracleSizeError are ValueErrors
_EXPECTED = (OSError, ValueError, RootFindingError)


def _error(e: BaseException, command: str) -> int:
    """Print one machine-readable error line and return the failure exit code."""
    payload = {"event": "error", "command": command, "error_type": type(e).__name__, "message": str(e)}
    print(json.dumps(payload, ensure_ascii=False), file=sys.stderr)
    return 2


def _float_list(s: str) -> list[float]:
    """Parse '2,3,4.5' into floats."""
    return [float(t) for t in s.split(",") if t.strip()]


def _int_list(s: str) -> list[int]:
    return [int(t) for t in s.split(",") if t.strip()]


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, parse_overrides(args.set or []))
    explicit: dict[str, Any] = {}
    if args.output is not None:
        explicit["output"] = args.output
    if args.format is not None:
        explicit["format"] = args.format
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigValidationError("'--workers' must be >= 1.")
        explicit["workers"] = args.workers
    if args.executor is not None:
        explicit["executor"] = args.executor
    if args.no_timing:
        explicit["timing"] = False
    cfg = dataclasses.replace(cfg, **explicit)

    bench = Bench(
        BenchConfig(
            max_workers=cfg.workers,
            executor=cfg.executor,
            emit_logs=not args.quiet,
            verbose=bool(args.verbose),
        )
    )
    try:
        rows = bench.run(cfg)
    except KeyboardInterrupt:
        print("Interrupted", file=sys.stderr)
        return 130

    text = emit_report(rows, cfg.format, cfg.output, include_timing=cfg.timing)
    if cfg.output is None:
        sys.stdout.write(text)
    else:
        ok = sum(1 for r in rows if not r.failed)
        print(f"Experiment: {cfg.name}")
        print(f"Methods: success={ok} failed={len(rows) - ok}")
        print(f"Report: {cfg.output}")

    failed = [r for r in rows if r.failed]
    for r in failed:
        payload = {"event": "method_failed", "method": r.method, "message": r.failure}
        print(json.dumps(payload, ensure_ascii=False), file=sys.stderr)
    return 1 if failed else 0


def _cmd_theory(args: argparse.Namespace) -> int:
    table = ratio_table(_float_list(args.c_list), tol=args.tol)
    text = table.to_csv()
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_oracle_sweep(args: argparse.Namespace) -> int:
    family = SweepFamily(k=args.k, z_values=tuple(_int_list(args.z_values)))
    log = EventLog(emit_logs=not args.quiet)
    result = ratio_sweep(family, args.trials, args.c, args.seed, log=log)
    phi, _ = solve_phi(args.c)
    psi, _ = solve_psi(args.c)
    within = result.max_ratio_okmeans <= phi + 1e-9 and result.max_ratio_okmeans2 <= psi + 1e-9
    summary = {
        "c": args.c,
        "trials": result.trials,
        "resamples": result.resamples,
        "max_ratio_okmeans": result.max_ratio_okmeans,
        "bound_okmeans": phi,
        "max_ratio_okmeans2": result.max_ratio_okmeans2,
        "bound_okmeans2": psi,
        "within_bounds": within,
    }
    print(json.dumps(summary, ensure_ascii=False, indent=2, sort_keys=True))
    return 0 if within else 1


def _cmd_inject(args: argparse.Namespace) -> int:
    data = load_csv(args.input, args.has_labels, header=args.header)
    if args.normalize:
        data = normalize_zscore(data)
    if args.outlier_classes:
        data = mark_label_outliers(data, _int_list(args.outlier_classes))
    if args.fraction is not None:
        if args.xi is None:
            raise ConfigValidationError("'--fraction' needs '--xi'.")
        data = inject_outliers(data, args.fraction, args.xi, args.seed)
    out = export_csv(data, args.output)
    print(f"Dataset: {data.name} n={data.n} d={data.d} outliers={data.n_true_outliers or 0}")
    print(f"Written: {out}")
    return 0


def main(argv: Any = None) -> int:
    parser = argparse.ArgumentParser(prog="okmeans", description="Robust k-Means with KNN outlier removal.")
    sub = parser.add_subparsers(dest="cmd", required=True)

    runp = sub.add_parser("run", help="Run an experiment config and emit a report.")
    runp.add_argument("config", help="Path to a key = value experiment file")
    runp.add_argument("--set", action="append", metavar="KEY=VALUE", help="Override a config key (repeatable)")
    runp.add_argument("--output", default=None, help="Write the report here instead of stdout")
    runp.add_argument("--format", choices=list(FORMATS), default=None, help="Report format")
    runp.add_argument("--workers", type=int, default=None, help="Max parallel jobs")
    runp.add_argument("--executor", choices=["process", "thread"], default=None, help="Executor type")
    runp.add_argument("--no-timing", action="store_true", help="Leave time columns empty (byte-reproducible)")
    runp.add_argument("--verbose", action="store_true", help="Include full tracebacks in logs")
    runp.add_argument("--quiet", action="store_true", help="Disable JSON-line logs")

    theop = sub.add_parser("theory", help="Tabulate the ratio functions as CSV.")
    theop.add_argument("--c-list", default="2,3,4,5,10", help="Comma-separated c values (> 1)")
    theop.add_argument("--tol", type=float, default=1e-12, help="Root-finding residual tolerance")
    theop.add_argument("--output", default=None, help="Write the CSV here instead of stdout")

    swp = sub.add_parser("oracle-sweep", help="Worst achieved/optimal ratio on planted tiny instances.")
    swp.add_argument("--trials", type=int, default=200)
    swp.add_argument("--c", type=float, default=3.0)
    swp.add_argument("--seed", type=int, default=0)
    swp.add_argument("--z-values", default="1,2", help="Comma-separated outlier budgets to draw from")
    swp.add_argument("--k", type=int, default=2)
    swp.add_argument("--quiet", action="store_true", help="Disable JSON-line logs")

    injp = sub.add_parser("inject", help="Prepare a dataset: normalize, mark label outliers, inject noise.")
    injp.add_argument("input", help="Input CSV")
    injp.add_argument("output", help="Output CSV (with header, label and outlier columns)")
    injp.add_argument("--fraction", type=float, default=None, help="Injected points as a fraction of n")
    injp.add_argument("--xi", type=float, default=None, help="Half-width of the injection hypercube")
    injp.add_argument("--seed", type=int, default=0)
    injp.add_argument("--normalize", action="store_true", help="z-score every column first")
    injp.add_argument("--has-labels", action="store_true", help="Last input column is an integer label")
    injp.add_argument("--header", action="store_true", help="Skip the first input row")
    injp.add_argument("--outlier-classes", default="", help="Comma-separated labels to mark as outliers")

    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "theory": _cmd_theory,
        "oracle-sweep": _cmd_oracle_sweep,
        "inject": _cmd_inject,
    }
    try:
        return handlers[args.cmd](args)
    except _EXPECTED as e:
        return _error(e, args.cmd)

"""Command-line benchmark runner.

    bench run --suite static_j25 [--config cfg.json] [--out DIR]
    bench summarize --in records.csv [--format md|csv]

``run`` writes records.csv, summary.csv and summary.md under --out and
prints the Markdown summary; ``summarize`` re-aggregates an existing
records file.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import (SUITES, config_from_json, default_config, read_records,
                    render, run_suite, summarize, write_records)


def _cmd_run(args) -> int:
    if args.config:
        cfg = config_from_json(Path(args.config).read_text())
        if args.suite and args.suite != cfg.suite:
            print(f"--suite {args.suite} conflicts with config suite {cfg.suite}",
                  file=sys.stderr)
            return 2
    else:
        if not args.suite:
            print("either --suite or --config is required", file=sys.stderr)
            return 2
        cfg = default_config(args.suite)
    records = run_suite(cfg)
    rows = summarize(records, dist_tol=cfg.dist_tol)
    out = Path(args.out or cfg.out_dir or "bench_out")
    out.mkdir(parents=True, exist_ok=True)
    write_records(records, out / "records.csv")
    (out / "summary.csv").write_text(render(rows, "csv"))
    (out / "summary.md").write_text(render(rows, "md"))
    print(f"suite={cfg.suite} replications={cfg.replications} "
          f"seed={cfg.master_seed} -> {out}")
    print(render(rows, "md"), end="")
    return 0


def _cmd_summarize(args) -> int:
    records = read_records(args.infile)
    rows = summarize(records, dist_tol=args.dist_tol)
    print(render(rows, args.format), end="")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="bench",
                                     description="fixed-point inner-loop benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a benchmark suite")
    p_run.add_argument("--suite", choices=SUITES)
    p_run.add_argument("--config", help="JSON config overriding suite defaults")
    p_run.add_argument("--out", default=None, help="output directory (default: config out_dir or bench_out)")
    p_run.set_defaults(func=_cmd_run)

    p_sum = sub.add_parser("summarize", help="aggregate a records.csv")
    p_sum.add_argument("--in", dest="infile", required=True)
    p_sum.add_argument("--format", choices=("csv", "md"), default="md")
    p_sum.add_argument("--dist-tol", type=float, default=1e-12)
    p_sum.set_defaults(func=_cmd_summarize)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())

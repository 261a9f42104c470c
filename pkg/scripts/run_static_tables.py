"""Reproduce the static benchmark tables (J=25, J=250, two-type, RCNL).

Writes records and summaries for each suite under --out/<suite>/ and prints
the Markdown tables. The two large suites take a minute or two each.
"""

import argparse
from pathlib import Path

from demandinv.bench import default_config, render, run_suite, summarize, write_records


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="bench_out", help="output root directory")
    ap.add_argument("--suites", nargs="*",
                    default=["static_j25", "static_j250", "static_2types", "rcnl"])
    ap.add_argument("--replications", type=int, default=None,
                    help="override the per-suite replication count")
    args = ap.parse_args()

    for suite in args.suites:
        cfg = default_config(suite)
        if args.replications:
            cfg.replications = args.replications
        records = run_suite(cfg)
        rows = summarize(records, dist_tol=cfg.dist_tol)
        out = Path(args.out) / suite
        out.mkdir(parents=True, exist_ok=True)
        write_records(records, out / "records.csv")
        (out / "summary.csv").write_text(render(rows, "csv"))
        (out / "summary.md").write_text(render(rows, "md"))
        print(f"== {suite} (replications={cfg.replications}, "
              f"seed={cfg.master_seed}) ==")
        print(render(rows, "md"))


if __name__ == "__main__":
    main()

"""Reproduce the dynamic benchmark tables (perfect foresight and IVS).

The perfect-foresight suite at its default 20 replications runs for several
minutes; pass --replications to shorten exploratory runs.
"""

import argparse
from pathlib import Path

from demandinv.bench import default_config, render, run_suite, summarize, write_records


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="bench_out", help="output root directory")
    ap.add_argument("--suites", nargs="*", default=["dynamic_pf", "dynamic_ivs"])
    ap.add_argument("--replications", type=int, default=None)
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

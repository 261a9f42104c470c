"""Compare spectral/SQUAREM step-size rules (S1, S2, S3') on the J=250 design.

The S3 baseline comes from the static_j250 suite; this sweep shows how the
alternative rules lose convergence on the gamma=1 mappings.
"""

import argparse
from pathlib import Path

from demandinv.bench import default_config, render, run_suite, summarize, write_records


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="bench_out", help="output root directory")
    ap.add_argument("--replications", type=int, default=None)
    args = ap.parse_args()

    cfg = default_config("stepsize_sweep")
    if args.replications:
        cfg.replications = args.replications
    records = run_suite(cfg)
    rows = summarize(records, dist_tol=cfg.dist_tol)
    out = Path(args.out) / "stepsize_sweep"
    out.mkdir(parents=True, exist_ok=True)
    write_records(records, out / "records.csv")
    (out / "summary.csv").write_text(render(rows, "csv"))
    (out / "summary.md").write_text(render(rows, "md"))
    print(f"== stepsize_sweep (replications={cfg.replications}, "
          f"seed={cfg.master_seed}) ==")
    print(render(rows, "md"))


if __name__ == "__main__":
    main()

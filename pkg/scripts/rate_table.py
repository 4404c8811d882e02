#!/usr/bin/env python3
"""Run the three preset spacing cases and print the empirical rate table.

Each case simulates both schemes over the coupled grid ladder k=1..5 and
fits the strong order from the endpoint mean-square differences.  CSVs for
every case land under --out (mse.csv, rates.csv, plotdata.csv per case).

    python scripts/rate_table.py --workers 2
    python scripts/rate_table.py --quick          # 200 paths per case
"""
import argparse
import sys
from pathlib import Path

from noncolliding.cli import main as cli_main


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out", help="output root (default: out)")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--quick", action="store_true", help="cap Monte Carlo paths at 200")
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args(argv)

    rates = {}
    for case in ("case1", "case2", "case3"):
        out_dir = Path(args.out) / case
        cli_args = ["converge", "--config", case, "--out", str(out_dir), "--workers", str(args.workers)]
        if args.quick:
            cli_args.append("--quick")
        if args.seed is not None:
            cli_args += ["--seed", str(args.seed)]
        print(f"== {case} ==", flush=True)
        rc = cli_main(cli_args)
        if rc != 0:
            return rc
        with open(out_dir / "rates.csv") as fh:
            next(fh)
            rates[case] = {row.split(",")[0]: float(row.split(",")[1]) for row in fh}

    print("\nempirical strong orders (beta):")
    print(f"{'scheme':8s} {'case1':>8s} {'case2':>8s} {'case3':>8s}")
    for scheme in ("siem", "sim"):
        row = " ".join(f"{rates[c][scheme]:8.2f}" for c in ("case1", "case2", "case3"))
        print(f"{scheme:8s} {row}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Reproduce the cutoff-to-equilibrium profile for the built-in epidemic.

Runs the full pipeline (certificate, t_N, exact quasi-equilibrium, TV
profile) at two sizes and writes CSVs plus a JSON summary under results/.
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from ddjump.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/cutoff")
    ap.add_argument("--reps", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args()
    model = os.path.join(os.path.dirname(__file__), "..", "models", "hamer_sir.cfg")
    rc = cli_main(
        [
            "cutoff",
            "--model",
            model,
            "--N",
            "50,200",
            "--x0",
            "1,1",
            "--s-grid=-3,-2,-1.5,-1,-0.5,0,0.5,1,1.5,2,3,4,5,6",
            "--reps",
            str(args.reps),
            "--delta",
            "1.8",
            "--rho-fraction",
            "0.9",
            "--seed",
            str(args.seed),
            "--workers",
            str(args.workers),
            "--out",
            args.out,
        ]
    )
    if rc == 0:
        rc = cli_main(["report", "--out", args.out])
    return rc


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Coupled-pair distance decay and coalescence for the built-in epidemic."""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from ddjump.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/couple")
    ap.add_argument("--N", type=int, default=400)
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args()
    model = os.path.join(os.path.dirname(__file__), "..", "models", "hamer_sir.cfg")
    rc = cli_main(
        [
            "couple",
            "--model",
            model,
            "--N",
            str(args.N),
            "--reps",
            str(args.reps),
            "--horizon",
            "20",
            "--record",
            ",".join(str(round(0.5 * k, 2)) for k in range(41)),
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

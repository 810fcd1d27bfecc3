"""Baseline rush-hour comparison: writes report, curves and figures to out/baseline."""

import argparse
import sys

from railfd.cli import main

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/baseline")
    args = ap.parse_args()
    rc = main(["compare", "--config", "configs/baseline.json", "--out", args.out])
    rc = rc or main(["compare", "--micro-only", "--config", "configs/baseline.json", "--out", args.out, "--format", "svg"])
    sys.exit(rc)

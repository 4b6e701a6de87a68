#!/usr/bin/env python3
"""Run the dim-2 Bayesian-learning benchmark (all samplers, 30 trials) and
emit the cross-algorithm comparison CSVs.

Heads up: the full run is ~15 min on two cores. Pass extra CLI flags through,
e.g. --out or --max-parallel.
"""

import sys
from pathlib import Path

from skewsgld.cli import main

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "example1.json"

if __name__ == "__main__":
    rc = main(["run", str(CONFIG), *sys.argv[1:]])
    if rc == 0:
        out = Path("out/example1")
        dirs = [str(out / a) for a in ("sgld", "accelerated", "alg1", "alg2", "alg3", "mh")]
        rc = main(["compare", *dirs, "--out", str(out / "comparison.csv")])
    sys.exit(rc)

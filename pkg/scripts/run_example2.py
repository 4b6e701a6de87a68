#!/usr/bin/env python3
"""Run the dim-10 Bayesian-learning benchmark at full scale (1e6 iterations,
50 trials). This is the long configuration; budget several hours, or reduce
with --out plus a hand-edited copy of the config.
"""

import sys
from pathlib import Path

from skewsgld.cli import main

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "example2.json"

if __name__ == "__main__":
    sys.exit(main(["run", str(CONFIG), *sys.argv[1:]]))

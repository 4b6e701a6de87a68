#!/usr/bin/env python3
"""Run the two-regime switching-cost tracking experiment (trace and
switch-event CSVs per trial)."""

import sys
from pathlib import Path

from skewsgld.cli import main

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "tracking_default.json"

if __name__ == "__main__":
    sys.exit(main(["track", str(CONFIG), *sys.argv[1:]]))

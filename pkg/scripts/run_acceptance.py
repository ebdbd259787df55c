#!/usr/bin/env python3
"""Run the acceptance gate and print one line per criterion.

Usage: python3 scripts/run_acceptance.py [--fast]

``--fast`` skips the slow criteria (5, 8, 9, 10).
"""

import argparse
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fast", action="store_true", help="skip the slow criteria")
    args = ap.parse_args()
    cmd = [sys.executable, "-m", "pytest", "-q", "-s", str(ROOT / "tests" / "test_acceptance.py")]
    if args.fast:
        cmd += ["-k", "not (05 or 08 or 09 or 10)"]
    return subprocess.call(cmd, cwd=ROOT)


if __name__ == "__main__":
    sys.exit(main())

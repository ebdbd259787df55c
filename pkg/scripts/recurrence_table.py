#!/usr/bin/env python3
"""Tabulate the unrolled induction-on-scales bound over p and R."""

import argparse

import numpy as np

from restriction_lab.probes import recurrence_iterate


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--K", type=float, default=16.0)
    ap.add_argument("--C", type=float, default=1.0)
    ap.add_argument("--ps", default="3.2,3.5,4,6")
    ap.add_argument("--max-log2R", type=int, default=40)
    args = ap.parse_args()
    Rs = 2.0 ** np.arange(4, args.max_log2R + 1, 4)
    ps = [float(p) for p in args.ps.split(",")]
    print("log2 R " + " ".join(f"{'p=' + format(p, 'g'):>12}" for p in ps))
    for R in Rs:
        row = [recurrence_iterate(1.0, args.C, args.K, p, R, 1.0).bound for p in ps]
        print(f"{int(np.log2(R)):>6} " + " ".join(f"{b:>12.5g}" for b in row))


if __name__ == "__main__":
    main()

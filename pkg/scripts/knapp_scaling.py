#!/usr/bin/env python3
"""Print the Knapp norm against K for several curvature orders m.

The measured slope at fixed R is shown next to the exponent predicted when
R grows with K, so the two can be compared by eye.
"""

import argparse

from restriction_lab.probes import knapp_exponent, knapp_probe


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ms", default="2,4", help="comma-separated curvature orders")
    ap.add_argument("--p", type=float, default=4.0)
    ap.add_argument("--Ks", default="16,256,4096")
    ap.add_argument("--R", type=float, default=8.0)
    args = ap.parse_args()
    Ks = [float(k) for k in args.Ks.split(",")]
    print(f"{'m':>3} {'K':>8} {'norm':>12} {'transport err':>14}")
    for m in (int(x) for x in args.ms.split(",")):
        s = knapp_probe(m, args.p, Ks, args.R, 0)
        for K, c, e in zip(s.grid, s.constants, s.extra["transport_rel_error"]):
            print(f"{m:>3} {K:>8g} {c:>12.5g} {e:>14.2e}")
        slope = "n/a (need 3 K values)" if s.fit is None else f"{s.fit.slope:+.3f}"
        print(f"    slope {slope}   predicted exponent {knapp_exponent(m, args.p):+.3f}")


if __name__ == "__main__":
    main()

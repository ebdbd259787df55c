#!/usr/bin/env python3
"""Run a parameter sweep through the experiment configs and store records.

Each sweep writes one record per seed to ``<out-dir>/results.jsonl`` and
then regenerates the CSV/plot-data report, exactly as the CLI does.

Examples
--------
python3 scripts/sweep.py decouple --seeds 0,1,2 --set p=4 --set sigmas=0.5,0.25
python3 scripts/sweep.py knapp --set Ks=16,256,4096
python3 scripts/sweep.py kakeya --set R=256 --set ensemble=random --seeds 0,1
"""

import argparse
import json
import logging
import sys
from dataclasses import fields
from datetime import datetime, timezone

from restriction_lab.errors import LabError, ResourceError
from restriction_lab.experiments import CONFIGS, materialize
from restriction_lab.oscillator import DEFAULT_R_MAX
from restriction_lab.records import append_record, make_record, write_report

log = logging.getLogger("sweep")


def _coerce(cls, key: str, text: str):
    f = {f.name: f for f in fields(cls)}
    if key not in f:
        raise SystemExit(f"{cls.__name__} has no field {key!r}; choose from {sorted(f)}")
    default = getattr(cls(), key)
    if isinstance(default, list):
        return [float(t) for t in text.split(",")]
    if isinstance(default, bool):
        return text.lower() in ("1", "true", "yes")
    if default is None:
        return text
    return type(default)(text)


def main() -> int:
    ap = argparse.ArgumentParser(description="seeded sweeps over experiment configs")
    ap.add_argument("subcommand", choices=sorted(CONFIGS))
    ap.add_argument("--seeds", default="0", help="comma-separated seeds")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config field")
    ap.add_argument("--out-dir", default="restriction_lab_out")
    ap.add_argument("--R-max", dest="R_max", type=float, default=DEFAULT_R_MAX)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cls = CONFIGS[args.subcommand]
    kw = {}
    for item in args.set:
        k, _, v = item.partition("=")
        kw[k] = _coerce(cls, k, v)
    cfg = cls(**kw)
    for seed in (int(s) for s in args.seeds.split(",")):
        t0 = datetime.now(timezone.utc).isoformat(timespec="seconds")
        try:
            out = cfg.run(seed, args.R_max)
        except ResourceError as exc:
            log.error("seed %d: resource limit: %s", seed, exc)
            return 3
        except LabError as exc:
            log.error("seed %d: %s", seed, exc)
            return 2
        t1 = datetime.now(timezone.utc).isoformat(timespec="seconds")
        config = {"subcommand": args.subcommand, "seed": seed, "R_max": args.R_max, **materialize(cfg)}
        rec = make_record(args.subcommand, config, seed, t0, t1, out.metrics, out.series)
        append_record(args.out_dir, rec)
        log.info("seed %d: %s", seed, json.dumps(out.metrics, sort_keys=True))
    for path in write_report(f"{args.out_dir}/results.jsonl", args.out_dir, args.subcommand):
        log.info("wrote %s", path)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: ``restriction-lab <subcommand> [flags]``.

Exit codes: 0 success, 2 invalid input (JSON error on stderr), 3 resource
limit, 64 unknown or missing subcommand.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from datetime import datetime, timezone
from typing import Optional, Sequence

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_RESOURCE = 3
EXIT_USAGE = 64

ENV_OUT = "RESTRICTION_LAB_OUT"
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")


class UsageError(Exception):
    def __init__(self, message: str, unknown_command: bool = False):
        super().__init__(message)
        self.unknown_command = unknown_command


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, "invalid choice" in message and "argument command" in message)


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--out-dir", default=d("restriction_lab_out"), help="directory for results.jsonl and reports")
    p.add_argument("--seed", type=int, default=d(0))
    p.add_argument("--threads", type=int, default=d(None), help="BLAS/OpenMP threads")
    p.add_argument("--R-max", dest="R_max", type=float, default=d(256.0), help="largest ball radius allowed")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="restriction-lab", description="Numerical experiments for restriction estimates on u^4 + v^4.")
    _global_flags(ap, suppress=False)
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, help_):
        s = sub.add_parser(name, help=help_)
        _global_flags(s, suppress=True)
        return s

    s = add("decompose", "K-regular decomposition of the unit square")
    s.add_argument("--K", type=float, default=256.0)

    s = add("extend", "L^p(B_R) norm of an extension")
    s.add_argument("--region", default="0,1,0,1", help="a1,b1,a2,b2")
    s.add_argument("--R", type=float, default=8.0)
    s.add_argument("--p", type=float, default=4.0)
    s.add_argument("--method", choices=["dense-grid", "monte-carlo"], default="dense-grid")
    s.add_argument("--g", default="constant", help="constant | cap:a1,b1,a2,b2 | unimodular:n1,n2")
    s.add_argument("--n-samples", type=int, default=200_000)
    s.add_argument("--out", default=None, help="also write the estimate to this file inside --out-dir")

    s = add("rescale-check", "verify a rescaling identity at random points")
    s.add_argument("--case", choices=["a", "b", "c", "cap", "curve"], default="a")
    s.add_argument("--K", type=float, default=16.0)
    s.add_argument("--lambda", dest="lam", type=float, default=0.5)
    s.add_argument("--sigma", type=float, default=0.25)
    s.add_argument("--m", type=int, default=4)
    s.add_argument("--probes", type=int, default=50)
    s.add_argument("--radius", type=float, default=8.0)
    s.add_argument("--n-random", type=int, default=5)
    s.add_argument("--tol", type=float, default=1e-8)

    s = add("wavepacket-check", "frame constant, round trip and decay of wave packets")
    s.add_argument("--R", type=float, default=32.0)
    s.add_argument("--lambda", dest="lam", type=float, default=0.5)
    s.add_argument("--sigma", type=float, default=0.5)
    s.add_argument("--trials", type=int, default=5)
    s.add_argument("--terms", type=int, default=8)

    s = add("kakeya", "L^2 norm of a sum of tube indicators")
    s.add_argument("--R", type=float, default=64.0)
    s.add_argument("--lambda", dest="lam", type=float, default=0.5)
    s.add_argument("--ensemble", choices=["bush", "random"], default="bush")

    s = add("decouple", "decoupling constants against 1/sigma")
    s.add_argument("--p", type=float, default=2.0)
    s.add_argument("--lambda", dest="lam", type=float, default=0.5)
    s.add_argument("--sigmas", type=_floats, default=[0.5])
    s.add_argument("--trials", type=int, default=10)
    s.add_argument("--n-samples", type=int, default=20_000)
    s.add_argument("--single-slab", action="store_true")

    s = add("sqfn", "square-function constants against R")
    s.add_argument("--p", type=float, default=4.0)
    s.add_argument("--lambda", dest="lam", type=float, default=0.5)
    s.add_argument("--Rs", type=_floats, default=[16.0])
    s.add_argument("--trials", type=int, default=10)
    s.add_argument("--n-samples", type=int, default=20_000)
    s.add_argument("--single-slab", action="store_true")

    s = add("qpr", "extremizer lower bounds for Q_p(R)")
    s.add_argument("--p", type=float, default=3.4)
    s.add_argument("--Rs", type=_floats, default=[8.0, 16.0, 32.0])
    s.add_argument("--iters", type=int, default=40)
    s.add_argument("--n-fit", type=int, default=4000)
    s.add_argument("--n-eval", type=int, default=50_000)

    s = add("knapp", "Knapp example norms against K")
    s.add_argument("--m", type=int, default=4)
    s.add_argument("--p", type=float, default=4.0)
    s.add_argument("--Ks", type=_floats, default=[16.0, 256.0, 4096.0])
    s.add_argument("--R", type=float, default=8.0)

    s = add("recurrence", "unroll the induction-on-scales recurrence")
    s.add_argument("--A", type=float, default=1.0)
    s.add_argument("--C", type=float, default=1.0)
    s.add_argument("--K", type=float, default=16.0)
    s.add_argument("--p", type=float, default=4.0)
    s.add_argument("--R", type=float, default=2.0**20)
    s.add_argument("--base", type=float, default=1.0)

    s = add("report", "CSV and plot data from results.jsonl")
    s.add_argument("--results", default=None, help="defaults to <out-dir>/results.jsonl")
    s.add_argument("--subcommand", default=None, help="keep only records of this subcommand")
    return ap


def _emit_error(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _resolve_inside(out_dir: str, name: str) -> str:
    root = os.path.realpath(out_dir)
    path = os.path.realpath(os.path.join(root, name))
    if os.path.commonpath([root, path]) != root:
        raise ValueError(f"--out {name!r} escapes the output directory")
    return path


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        if exc.unknown_command:
            return _emit_error("usage", str(exc), EXIT_USAGE)
        return _emit_error("validation", str(exc), EXIT_INVALID)
    if args.command is None:
        return _emit_error("usage", "a subcommand is required", EXIT_USAGE)
    if args.threads is not None:
        if args.threads < 1:
            return _emit_error("validation", "--threads must be >= 1", EXIT_INVALID)
        for v in _THREAD_VARS:
            os.environ[v] = str(args.threads)
    out_dir = os.environ.get(ENV_OUT) or args.out_dir
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")

    # numpy is imported only after the thread variables are set
    from .errors import LabError, ResourceError
    from .experiments import CONFIGS, materialize
    from .records import append_record, make_record, write_report

    try:
        if args.command == "report":
            results = args.results or os.path.join(out_dir, "results.jsonl")
            paths = write_report(results, out_dir, args.subcommand)
            print(json.dumps({"written": paths}))
            return EXIT_OK
        cls = CONFIGS[args.command]
        cfg = cls(**{k: getattr(args, k) for k in cls.__dataclass_fields__})
        started = _now()
        outcome = cfg.run(args.seed, args.R_max)
        finished = _now()
        config = {"subcommand": args.command, "seed": args.seed, "R_max": args.R_max, **materialize(cfg)}
        rec = make_record(args.command, config, args.seed, started, finished, outcome.metrics, outcome.series)
        if args.command == "extend" and cfg.out:
            path = _resolve_inside(out_dir, cfg.out)
            os.makedirs(os.path.dirname(path), exist_ok=True)
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(outcome.payload, fh, sort_keys=True)
        append_record(out_dir, rec)
        print(json.dumps({"record": rec.to_dict(), "result": outcome.payload}, sort_keys=True))
        return EXIT_OK
    except ResourceError as exc:
        return _emit_error("resource", str(exc), EXIT_RESOURCE)
    except (LabError, ValueError) as exc:
        return _emit_error("validation", str(exc), EXIT_INVALID)


if __name__ == "__main__":
    sys.exit(main())

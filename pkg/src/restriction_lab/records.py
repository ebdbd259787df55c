"""Experiment records: canonical configs, digests, JSONL persistence, reports."""

from __future__ import annotations

import csv
import fcntl
import hashlib
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Optional

from . import __version__
from .errors import ParameterError

log = logging.getLogger(__name__)

RESULTS_NAME = "results.jsonl"
REPORT_DIR = "report"


def canonical(value: Any) -> Any:
    """JSON-ready copy with tuples as lists, integral floats kept as floats."""
    if isinstance(value, dict):
        return {str(k): canonical(v) for k, v in sorted(value.items(), key=lambda kv: str(kv[0]))}
    if isinstance(value, (list, tuple)):
        return [canonical(v) for v in value]
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, int):
        return int(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            return repr(value)
        return float(value)
    # numpy scalars
    if hasattr(value, "item"):
        return canonical(value.item())
    return str(value)


def dumps(obj: Any) -> str:
    return json.dumps(canonical(obj), sort_keys=True, separators=(",", ":"))


def config_digest(config: dict) -> str:
    return hashlib.sha256(dumps(config).encode()).hexdigest()


def flatten(d: dict, prefix: str = "") -> dict[str, float]:
    """Numeric leaves of a nested dict as ``a.b.c -> number`` (bools as 0/1)."""
    out: dict[str, float] = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        elif isinstance(v, bool):
            out[key] = int(v)
        elif isinstance(v, (int, float)) and not isinstance(v, bool):
            out[key] = v
        elif hasattr(v, "item") and not hasattr(v, "__len__"):
            out[key] = v.item()
    return out


@dataclass
class ExperimentRecord:
    subcommand: str
    config: dict
    digest: str
    seed: int
    started: str
    finished: str
    metrics: dict
    version: str = __version__
    series: Optional[dict] = None
    status: str = "ok"
    notes: list = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.subcommand:
            raise ParameterError("record needs a subcommand")
        if config_digest(self.config) != self.digest:
            raise ParameterError("config digest does not match config")
        for k, v in self.metrics.items():
            if not isinstance(k, str):
                raise ParameterError(f"metric key {k!r} is not a string")
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ParameterError(f"metric {k!r} is not a number")
        if self.series is not None:
            s = self.series
            if len(s.get("grid", [])) != len(s.get("constants", [])):
                raise ParameterError("series grid and constants differ in length")

    def to_dict(self) -> dict:
        return canonical(asdict(self))

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentRecord":
        keys = {f for f in cls.__dataclass_fields__}
        extra = set(d) - keys
        if extra:
            raise ParameterError(f"unknown record fields {sorted(extra)}")
        return cls(**d)

    def metrics_json(self) -> str:
        """Byte-stable serialization of the metrics (what determinism compares)."""
        return dumps(self.metrics)


def make_record(subcommand: str, config: dict, seed: int, started: str, finished: str, metrics: dict, series=None, notes=()) -> ExperimentRecord:
    cfg = canonical(config)
    return ExperimentRecord(
        subcommand=subcommand,
        config=cfg,
        digest=config_digest(cfg),
        seed=int(seed),
        started=started,
        finished=finished,
        metrics=canonical(flatten(metrics)),
        series=None if series is None else canonical(series),
        notes=list(notes),
    )


def append_record(out_dir: str, rec: ExperimentRecord) -> str:
    """Append one line to ``<out_dir>/results.jsonl`` under an exclusive lock."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, RESULTS_NAME)
    line = rec.to_json() + "\n"
    with open(path, "a", encoding="utf-8") as fh:
        fcntl.flock(fh.fileno(), fcntl.LOCK_EX)
        try:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())
        finally:
            fcntl.flock(fh.fileno(), fcntl.LOCK_UN)
    return path


def read_records(path: str) -> list[ExperimentRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        fcntl.flock(fh.fileno(), fcntl.LOCK_SH)
        try:
            lines = fh.readlines()
        finally:
            fcntl.flock(fh.fileno(), fcntl.LOCK_UN)
    for n, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            out.append(ExperimentRecord.from_dict(json.loads(line)))
        except (ValueError, TypeError) as exc:
            raise ParameterError(f"{path}:{n}: bad record ({exc})") from exc
    return out


# ---------------------------------------------------------------------------
# reports

_FIXED = ["digest", "seed", "started", "finished", "status"]


def _write_csv(path: str, records: list[ExperimentRecord]) -> None:
    keys = sorted({k for r in records for k in r.metrics})
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(_FIXED + keys)
        for r in records:
            w.writerow([getattr(r, k) for k in _FIXED] + [r.metrics.get(k, "") for k in keys])


def _write_xy(path: str, xs: Iterable[float], ys: Iterable[float]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for x, y in zip(xs, ys):
            fh.write(f"{x!r} {y!r}\n")


def write_report(results: str, out_dir: str, subcommand: Optional[str] = None) -> list[str]:
    """One CSV per subcommand plus plot data for every series; returns written paths.

    An empty selection writes a header-only CSV and logs a warning.
    """
    if not os.path.exists(results):
        raise ParameterError(f"results file {results} does not exist")
    recs = [r for r in read_records(results) if subcommand is None or r.subcommand == subcommand]
    rep = os.path.join(out_dir, REPORT_DIR)
    os.makedirs(rep, exist_ok=True)
    written = []
    if not recs:
        log.warning("no records selected%s", f" for {subcommand!r}" if subcommand else "")
        path = os.path.join(rep, f"{subcommand or 'empty'}.csv")
        _write_csv(path, [])
        return [path]
    groups: dict[str, list[ExperimentRecord]] = {}
    for r in recs:
        groups.setdefault(r.subcommand, []).append(r)
    for sub, rs in sorted(groups.items()):
        path = os.path.join(rep, f"{sub}.csv")
        _write_csv(path, rs)
        written.append(path)
        for r in rs:
            if r.series is None:
                continue
            stem = os.path.join(rep, f"{sub}_{r.digest[:12]}_s{r.seed}")
            xs, ys = r.series["grid"], r.series["constants"]
            _write_xy(stem + ".dat", xs, ys)
            written.append(stem + ".dat")
            fit = r.series.get("fit")
            if fit:
                line = [math.exp(fit["intercept"]) * x ** fit["slope"] for x in xs]
                _write_xy(stem + "_fit.dat", xs, line)
                written.append(stem + "_fit.dat")
    return written

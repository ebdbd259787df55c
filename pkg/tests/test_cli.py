import csv
import json
import os

import pytest
from hypothesis import given, strategies as st

from restriction_lab.cli import EXIT_INVALID, EXIT_OK, EXIT_RESOURCE, EXIT_USAGE, main
from restriction_lab.errors import ParameterError
from restriction_lab.probes import fit_exponent
from restriction_lab.records import (
    ExperimentRecord,
    config_digest,
    make_record,
    read_records,
    write_report,
)


def _run(tmp_path, *args):
    code = main(["--out-dir", str(tmp_path), *args])
    return code


def _records(tmp_path):
    return read_records(os.path.join(tmp_path, "results.jsonl"))


@given(st.dictionaries(st.text(min_size=1, max_size=5), st.one_of(st.integers(), st.floats(allow_nan=False, allow_infinity=False), st.text(max_size=5))))
def test_digest_ignores_key_order(d):
    rev = dict(reversed(list(d.items())))
    assert config_digest(d) == config_digest(rev)


def test_digest_changes_with_defaults():
    assert config_digest({"K": 256.0}) != config_digest({"K": 256.0, "extra": 1})


def test_record_round_trip():
    rec = make_record("x", {"a": 1, "b": [1, 2]}, 3, "t0", "t1", {"m": 1.5, "nested": {"k": 2}, "flag": True})
    again = ExperimentRecord.from_dict(json.loads(rec.to_json()))
    assert again == rec
    assert rec.metrics == {"flag": 1, "m": 1.5, "nested.k": 2}


def test_record_rejects_tampering():
    rec = make_record("x", {"a": 1}, 0, "t0", "t1", {"m": 1.0})
    d = rec.to_dict()
    d["config"]["a"] = 2
    with pytest.raises(ParameterError):
        ExperimentRecord.from_dict(d)


def test_decompose_record(tmp_path, capsys):
    assert _run(tmp_path, "decompose", "--K", "256") == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert len(out["result"]["cells"]) == 36
    (rec,) = _records(tmp_path)
    assert rec.metrics["cell_count"] == 36
    assert rec.metrics["total_area"] == pytest.approx(1.0, abs=1e-12)


def test_global_flags_after_subcommand(tmp_path):
    assert main(["decompose", "--K", "16", "--out-dir", str(tmp_path), "--seed", "5"]) == EXIT_OK
    (rec,) = _records(tmp_path)
    assert rec.seed == 5 and rec.metrics["cell_count"] == 4


def test_env_overrides_out_dir(tmp_path, monkeypatch):
    target = tmp_path / "env"
    monkeypatch.setenv("RESTRICTION_LAB_OUT", str(target))
    assert main(["--out-dir", str(tmp_path / "flag"), "decompose", "--K", "16"]) == EXIT_OK
    assert (target / "results.jsonl").exists()
    assert not (tmp_path / "flag").exists()


def test_exit_codes(tmp_path, capsys):
    assert _run(tmp_path, "nonsense") == EXIT_USAGE
    assert main([]) == EXIT_USAGE
    assert _run(tmp_path, "decompose", "--K", "17") == EXIT_INVALID
    err = capsys.readouterr().err.strip().splitlines()[-1]
    assert json.loads(err)["error"] == "validation"
    assert _run(tmp_path, "decompose", "--bogus") == EXIT_INVALID
    assert _run(tmp_path, "decouple", "--sigmas", "0.125") == EXIT_RESOURCE
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "resource"
    assert _run(tmp_path, "extend", "--out", "../escape.json") == EXIT_INVALID
    assert not (tmp_path.parent / "escape.json").exists()


def test_extend_writes_inside_out_dir(tmp_path):
    assert _run(tmp_path, "extend", "--R", "4", "--out", "sub/est.json") == EXIT_OK
    est = json.loads((tmp_path / "sub" / "est.json").read_text())
    assert est["value"] > 0 and est["method"] == "dense-grid"


SMALL = {
    "decompose": ["--K", "256"],
    "extend": ["--R", "4"],
    "rescale-check": ["--case", "b", "--K", "256", "--lambda", "0.25", "--probes", "10", "--n-random", "1"],
    "wavepacket-check": ["--R", "16", "--trials", "1"],
    "kakeya": ["--R", "64", "--ensemble", "random"],
    "decouple": ["--sigmas", "0.5", "--trials", "2"],
    "sqfn": ["--Rs", "16", "--trials", "2"],
    "qpr": ["--Rs", "4,6,8", "--iters", "3", "--n-fit", "500", "--n-eval", "2000"],
    "knapp": ["--Ks", "16,256,4096", "--R", "4"],
    "recurrence": ["--C", "1", "--p", "6", "--R", "4096"],
}


@pytest.mark.parametrize("sub", sorted(SMALL))
def test_every_subcommand_is_deterministic(tmp_path, sub):
    for _ in range(2):
        assert _run(tmp_path, "--seed", "7", sub, *SMALL[sub]) == EXIT_OK
    a, b = _records(tmp_path)
    assert a.digest == b.digest
    assert a.metrics_json() == b.metrics_json()


def test_report(tmp_path, caplog):
    _run(tmp_path, "decompose", "--K", "16")
    _run(tmp_path, "qpr", *SMALL["qpr"])
    res = tmp_path / "results.jsonl"
    paths = write_report(str(res), str(tmp_path))
    names = sorted(os.path.basename(p) for p in paths)
    assert "decompose.csv" in names and "qpr.csv" in names
    assert any(n.endswith("_fit.dat") for n in names)
    with open(tmp_path / "report" / "qpr.csv") as fh:
        (row,) = list(csv.DictReader(fh))
    (rec,) = [r for r in _records(tmp_path) if r.subcommand == "qpr"]
    fit = fit_exponent(rec.series["grid"], rec.series["constants"])
    assert float(row["fit.slope"]) == pytest.approx(fit.slope, abs=1e-12)
    with open(tmp_path / "report" / "decompose.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 1
    # filter
    only = write_report(str(res), str(tmp_path / "f"), "decompose")
    assert [os.path.basename(p) for p in only] == ["decompose.csv"]
    # empty selection
    empty = write_report(str(res), str(tmp_path / "e"), "kakeya")
    with open(empty[0]) as fh:
        assert list(csv.DictReader(fh)) == []
    assert "no records" in caplog.text


def test_report_cli(tmp_path, capsys):
    _run(tmp_path, "decompose", "--K", "16")
    assert _run(tmp_path, "report", "--subcommand", "missing") == EXIT_OK
    assert _run(tmp_path / "nowhere", "report") == EXIT_INVALID

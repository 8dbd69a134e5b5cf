import json
import math

import numpy as np
import pandas as pd
import pytest

from models.experiments import ExperimentRecord, Provenance
from models.invasion_simulator import FieldState
from models.spectrum_analyzer import Verdict
from utils.errors import ConfigError, ContractViolation
from utils.report_writer import (CRITERIA_COLUMNS, criteria_frame, emit, ensure_writable, jsonable, load_records,
                                 snapshots_frame, write_record, write_report, write_table)


def _record(name="demo", ok=True):
    record = ExperimentRecord(name, measured={"speed": 2.0})
    record.close("speed", 2.0 if ok else 3.0, 2.0, 0.01, Provenance.PUBLISHED)
    record.tables["track"] = pd.DataFrame({"t": [0.0, 1.0], "x": [0.0, 1.0 / 3.0]})
    return record


def test_jsonable_conversions():
    assert jsonable(1.0 / 3.0) == 0.333333333333
    assert jsonable(float("nan")) is None
    assert jsonable(np.float64(2.5)) == 2.5
    assert jsonable(np.int64(3)) == 3
    assert jsonable(np.bool_(True)) is True
    assert jsonable(complex(1.0, -2.0)) == {"re": 1.0, "im": -2.0}
    assert jsonable(Verdict.UNSTABLE) == "unstable"
    assert jsonable(np.array([1.0, math.inf])) == [1.0, None]
    assert jsonable({1: (1, 2)}) == {"1": [1, 2]}


def test_write_table_uses_lf_and_twelve_digits(tmp_path):
    path = write_table(pd.DataFrame({"a": [1.0 / 3.0], "b": ["x"]}), tmp_path / "t.csv")
    raw = path.read_bytes()
    assert b"\r\n" not in raw
    assert raw.decode("utf-8") == "a,b\n0.333333333333,x\n"


def test_snapshots_frame_long_format():
    x = np.array([0.0, 1.0])
    snaps = [FieldState(t=t, x=x, values=np.array([[t, t], [0.0, 1.0]])) for t in (0.0, 1.0)]
    frame = snapshots_frame(snaps)
    assert list(frame.columns) == ["t", "x", "u1", "u2"]
    assert len(frame) == 4
    assert frame["u1"].tolist() == [0.0, 0.0, 1.0, 1.0]


def test_criteria_frame_columns():
    frame = criteria_frame([_record(), _record("other", ok=False)])
    assert list(frame.columns) == CRITERIA_COLUMNS
    assert frame["pass"].tolist() == [True, False]
    assert frame["provenance"].tolist() == ["published", "published"]


def test_write_record_and_load(tmp_path):
    out = write_record(_record(), tmp_path / "demo")
    assert (out / "record.json").is_file()
    assert (out / "track.csv").read_text(encoding="utf-8").startswith("t,x\n")
    loaded = load_records(tmp_path)
    assert [r["name"] for r in loaded] == ["demo"]
    assert loaded[0]["passed"] is True


def test_report_is_deterministic(tmp_path):
    records = [_record("b"), _record("a", ok=False)]
    first = write_report(records, tmp_path / "r1")
    second = write_report(list(reversed(records)), tmp_path / "r2")
    for fmt in ("json", "md"):
        assert first[fmt].read_bytes() == second[fmt].read_bytes()
    summary = json.loads(first["json"].read_text(encoding="utf-8"))
    assert [e["name"] for e in summary["experiments"]] == ["a", "b"]
    assert summary["all_passed"] is False
    md = first["md"].read_text(encoding="utf-8")
    assert "- a: FAIL" in md and "- b: PASS" in md


def test_report_from_loaded_records_with_pdf(tmp_path):
    write_record(_record(), tmp_path / "runs" / "demo")
    paths = write_report(load_records(tmp_path / "runs"), tmp_path / "report", pdf=True)
    assert paths["pdf"].read_bytes().startswith(b"%PDF")


def test_ensure_writable_rejects_file_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x", encoding="utf-8")
    with pytest.raises(ConfigError):
        ensure_writable(blocker / "sub")


def test_emit_formats(tmp_path):
    frame = pd.DataFrame({"a": [1.0]})
    assert emit(frame, "csv", tmp_path / "a.csv").read_text(encoding="utf-8") == "a\n1\n"
    data = json.loads(emit(_record(), "json", tmp_path / "r.json").read_text(encoding="utf-8"))
    assert data["name"] == "demo"
    assert emit(_record(), "md", tmp_path / "r.md").read_text(encoding="utf-8").startswith("| experiment |")
    with pytest.raises(ContractViolation):
        emit(_record(), "csv", tmp_path / "x.csv")
    with pytest.raises(ContractViolation):
        emit(frame, "xml", tmp_path / "x.xml")

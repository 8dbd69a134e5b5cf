import json

import pandas as pd
import pytest

from utils.errors import ConfigError
from utils.run_config import validate_config
from utils.sweep_manager import INDEX_FILE, MERGED_FILE, TIMINGS_FILE, SweepManager, parse_axis, run_point

TEMPLATE = {
    "model": {"preset": "kpp"},
    "numerics": {"T": 2.0, "x_range": [-10.0, 30.0]},
    "tracking": {"offset": 5.0},
}


def test_run_point_writes_outputs(tmp_path):
    summary = run_point(validate_config(TEMPLATE), tmp_path / "single")
    for name in ("resolved_config.json", "snapshots.csv", "fronts.csv", "track_meta.json"):
        assert (tmp_path / "single" / name).is_file()
    assert summary["status"] == "ok"
    assert summary["wake_state"] == "(+1)"
    header = (tmp_path / "single" / "snapshots.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "t,x,u1"


def test_run_point_needs_model_or_experiment(tmp_path):
    with pytest.raises(ConfigError):
        run_point(validate_config({}), tmp_path / "empty")


def test_cartesian_sweep_and_index(tmp_path):
    axes = {"numerics.T": [1.0, 2.0], "initial.position": [0.0, 1.0, 2.0]}
    manager = SweepManager(tmp_path / "sweep", TEMPLATE, axes)
    assert [p["point_id"] for p in manager.points()] == [f"p{i:04d}" for i in range(6)]
    merged = manager.run()
    assert len(merged) == 6
    assert list(merged.columns[:5]) == ["point_id", "numerics.T", "initial.position", "status", "error"]
    assert set(merged["status"]) == {"ok"}
    assert len(pd.read_csv(tmp_path / "sweep" / MERGED_FILE)) == 6
    index = json.loads((tmp_path / "sweep" / INDEX_FILE).read_text(encoding="utf-8"))
    assert len(index["points"]) == 6
    reopened = SweepManager(tmp_path / "sweep", TEMPLATE, axes)
    assert len(reopened.merged_frame()) == 6


def test_single_point_sweep_matches_direct_run(tmp_path):
    direct = run_point(validate_config(TEMPLATE), tmp_path / "direct")
    merged = SweepManager(tmp_path / "sweep", TEMPLATE, {"numerics.T": [2.0]}).run()
    assert merged.loc[0, "speed"] == pytest.approx(direct["speed"], rel=1e-10)


def test_failed_point_is_recorded_and_sweep_continues(tmp_path):
    template = dict(TEMPLATE, model={"preset": "linear"})
    manager = SweepManager(tmp_path / "sweep", template, {"model.params.r": [0.5, 1000.0]})
    merged = manager.run()
    assert merged["status"].tolist() == ["ok", "failed"]
    failures = manager.failures()
    assert len(failures) == 1
    assert failures[0]["error"].startswith("ContractViolation")


def test_empty_axis_rejected(tmp_path):
    with pytest.raises(ConfigError):
        SweepManager(tmp_path / "sweep", TEMPLATE, {"numerics.T": []})


def test_parse_axis():
    assert parse_axis("model.params.beta=0.4,0.5") == ("model.params.beta", [0.4, 0.5])
    assert parse_axis("initial.kind=step,bump") == ("initial.kind", ["step", "bump"])
    for bad in ("numerics.T", "numerics.T=", "numerics.T=NaN"):
        with pytest.raises(ConfigError):
            parse_axis(bad)


def test_rerun_keeps_finished_points(tmp_path):
    axes = {"initial.position": [0.0, 1.0]}
    SweepManager(tmp_path / "sweep", TEMPLATE, axes).run()
    index_before = (tmp_path / "sweep" / INDEX_FILE).read_bytes()
    timings_before = json.loads((tmp_path / "sweep" / TIMINGS_FILE).read_text(encoding="utf-8"))
    SweepManager(tmp_path / "sweep", TEMPLATE, axes).run()
    timings_after = json.loads((tmp_path / "sweep" / TIMINGS_FILE).read_text(encoding="utf-8"))
    assert (tmp_path / "sweep" / INDEX_FILE).read_bytes() == index_before
    assert timings_after == timings_before
    assert set(timings_after) == {"p0000", "p0001"}


def test_equal_sweeps_write_identical_indexes(tmp_path):
    axes = {"initial.position": [0.0, 1.0]}
    for name in ("first", "second"):
        SweepManager(tmp_path / name, TEMPLATE, axes).run()
    first = (tmp_path / "first" / INDEX_FILE).read_bytes()
    assert first == (tmp_path / "second" / INDEX_FILE).read_bytes()
    assert b"finished_at" not in first
    timings = json.loads((tmp_path / "first" / TIMINGS_FILE).read_text(encoding="utf-8"))
    assert set(timings["p0000"]) == {"started_at", "finished_at"}

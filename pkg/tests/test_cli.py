import json

import pytest

from app.main import main
from utils.errors import EXIT_CONFIG, EXIT_CRITERION, EXIT_OK


def _config(tmp_path, data):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def test_speed_prints_json(capsys):
    code = main(["speed", "--preset", "nagumo", "--param", "a=-1", "--at", "0"])
    assert code == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["c_lin"] == pytest.approx(2.0, abs=1e-8)
    assert payload["eta"] == pytest.approx(1.0, abs=1e-6)


def test_unknown_preset_is_a_config_error():
    assert main(["speed", "--preset", "nagumoo", "--at", "0"]) == EXIT_CONFIG


def test_stable_state_is_a_contract_error():
    assert main(["speed", "--preset", "kpp", "--at", "1"]) == EXIT_CONFIG


def test_droots_from_config(tmp_path, capsys):
    config = _config(tmp_path, {"model": {"preset": "kpp"}, "front": {"at": [0.0]}})
    out = tmp_path / "droots"
    assert main(["droots", "--config", config, "--out", str(out)]) == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["c"] == pytest.approx(2.0, abs=1e-8)
    assert summary["double_roots"] >= 1
    lines = (out / "double_roots.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "c,re_lambda,im_lambda,re_nu,im_nu,pinched,degenerate"
    assert "True" in lines[1]
    assert (out / "spreading.csv").read_text(encoding="utf-8").startswith("c_lin,eta,d_eff\n")
    assert (out / "resolved_config.json").is_file()


def test_droots_flags_override_config(tmp_path, capsys):
    config = _config(tmp_path, {"model": {"preset": "kpp"}, "front": {"at": [0.0], "c": 2.0}})
    out = tmp_path / "droots"
    assert main(["droots", "--config", config, "--c", "3", "--no-pinch", "--out", str(out)]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["c"] == pytest.approx(3.0)
    resolved = json.loads((out / "resolved_config.json").read_text(encoding="utf-8"))
    assert resolved["front"]["check_pinch"] is False
    assert resolved["front"]["c"] == 3.0


def test_droots_without_state_is_a_config_error(tmp_path):
    assert main(["droots", "--preset", "kpp", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_profile_writes_table_and_meta(tmp_path):
    out = tmp_path / "profile"
    code = main(["profile", "--preset", "kpp", "--c", "2", "--from", "1", "--method", "shoot", "--L", "20",
                 "--out", str(out)])
    assert code == EXIT_OK
    assert (out / "profile.csv").read_text(encoding="utf-8").startswith("xi,u1\n")
    meta = json.loads((out / "profile_meta.json").read_text(encoding="utf-8"))
    assert meta["c"] == pytest.approx(2.0)
    assert meta["eta"] == pytest.approx(1.0, abs=0.05)
    assert set(meta) == {"c", "eta", "a_plus", "steepness", "residual"}


def test_profile_from_config(tmp_path):
    config = _config(tmp_path, {"model": {"preset": "kpp"}, "numerics": {"L": 20.0},
                                "front": {"c": 2.0, "state_minus": [1.0], "method": "shoot"}})
    out = tmp_path / "profile"
    assert main(["profile", "--config", config, "--out", str(out)]) == EXIT_OK
    assert (out / "profile.csv").is_file()


def test_profile_without_speed_is_a_config_error(tmp_path):
    assert main(["profile", "--preset", "kpp", "--from", "1", "--out", str(tmp_path)]) == EXIT_CONFIG


@pytest.mark.slow
def test_spectrum_writes_checklist(tmp_path, capsys):
    out = tmp_path / "spectrum"
    code = main(["spectrum", "--preset", "kpp", "--c", "2", "--from", "1", "--method", "shoot", "--L", "30",
                 "--n-grid", "1201", "--out", str(out)])
    assert code == EXIT_OK
    checklist = json.loads((out / "checklist.json").read_text(encoding="utf-8"))
    assert set(checklist) == {"wake_attracting", "pinched_dr_at_zero", "weighted_spectrum_stable",
                              "no_weighted_kernel_but_generic_tail", "verdict"}
    assert json.loads(capsys.readouterr().out) == checklist
    assert (out / "essential.csv").read_text(encoding="utf-8").startswith("branch,k,re_lambda,im_lambda\n")
    assert (out / "point_eigs.csv").read_text(encoding="utf-8").startswith("re_lambda,im_lambda\n")


def test_simulate_from_config(tmp_path, capsys):
    config = _config(tmp_path, {"model": {"preset": "kpp"}, "numerics": {"T": 2.0, "x_range": [-10.0, 30.0]}})
    assert main(["simulate", "--config", config, "--out", str(tmp_path / "sim")]) == EXIT_OK
    for name in ("snapshots.csv", "fronts.csv", "track_meta.json", "resolved_config.json"):
        assert (tmp_path / "sim" / name).is_file()
    assert json.loads(capsys.readouterr().out)["status"] == "ok"


def test_simulate_rejects_unknown_key(tmp_path):
    config = _config(tmp_path, {"modle": {"preset": "kpp"}})
    assert main(["simulate", "--config", config, "--out", str(tmp_path / "sim")]) == EXIT_CONFIG


def test_experiment_then_report(tmp_path):
    out = tmp_path / "runs"
    assert main(["experiment", "spreading_speeds", "--out", str(out)]) == EXIT_OK
    assert (out / "spreading_speeds" / "record.json").is_file()
    assert (out / "spreading_speeds" / "timings.json").is_file()
    assert main(["report", "--dir", str(out)]) == EXIT_OK
    assert (out / "report.md").is_file()
    assert (out / "report.json").is_file()


def test_report_with_failed_criterion(tmp_path):
    run_dir = tmp_path / "runs" / "demo"
    run_dir.mkdir(parents=True)
    record = {"name": "demo", "passed": False, "criteria": [
        {"name": "speed", "measured": 3.0, "expected": 2.0, "tolerance": 0.01,
         "provenance": "published", "passed": False},
    ]}
    (run_dir / "record.json").write_text(json.dumps(record), encoding="utf-8")
    assert main(["report", "--dir", str(tmp_path / "runs")]) == EXIT_CRITERION


def test_report_without_records(tmp_path):
    assert main(["report", "--dir", str(tmp_path)]) == EXIT_CONFIG


def test_experiment_param_with_all_is_rejected(tmp_path):
    assert main(["experiment", "all", "--param", "mu=0.1", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_sweep_command(tmp_path):
    config = _config(tmp_path, {"model": {"preset": "kpp"}, "numerics": {"T": 1.0, "x_range": [-10.0, 20.0]}})
    code = main(["sweep", "--config", config, "--axis", "initial.position=0,1", "--out", str(tmp_path / "sw")])
    assert code == EXIT_OK
    assert (tmp_path / "sw" / "sweep.csv").is_file()


def test_unknown_experiment_name_exits_from_argparse():
    with pytest.raises(SystemExit) as info:
        main(["experiment", "nope"])
    assert info.value.code == 2


def test_repeated_experiment_records_are_byte_identical(tmp_path):
    for run in ("first", "second"):
        assert main(["experiment", "spreading_speeds", "--out", str(tmp_path / run)]) == EXIT_OK
    first = (tmp_path / "first" / "spreading_speeds" / "record.json").read_bytes()
    second = (tmp_path / "second" / "spreading_speeds" / "record.json").read_bytes()
    assert first == second

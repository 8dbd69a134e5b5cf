import json
import math

import pytest

from models.experiments import EXPERIMENTS, ExperimentRecord, Provenance, run_experiment
from models.spectrum_analyzer import Mechanism
from utils.errors import CatalogMissError, ConfigError


def test_record_close_relative_and_absolute():
    record = ExperimentRecord("demo")
    assert record.close("rel", 2.01, 2.0, 0.01, Provenance.PUBLISHED).passed
    assert not record.close("abs", 0.2, 0.0, 0.1, Provenance.DERIVED, relative=False).passed
    assert not record.close("nan", float("nan"), 1.0, 1.0, Provenance.TRIVIAL).passed
    assert not record.passed


def test_record_holds_and_explicit_decision():
    record = ExperimentRecord("demo")
    record.holds("equal", ["A0"], ["A0"], Provenance.PUBLISHED)
    record.holds("decided", [1.0, 2.0], "first < second", Provenance.DERIVED, passed=True)
    assert record.passed


def test_empty_record_does_not_pass():
    assert not ExperimentRecord("empty").passed


def test_record_dict_is_json_ready():
    record = ExperimentRecord("demo", measured={"mechanism": Mechanism.POINT, "value": 1.0 / 3.0})
    record.close("c", 2.0, 2.0, 1e-8, Provenance.PUBLISHED)
    data = record.to_dict()
    json.dumps(data)
    assert data["measured"] == {"mechanism": "point", "value": 0.333333333333}
    assert data["criteria"][0]["provenance"] == "published"
    assert data["passed"] is True
    assert "runtime" not in data


def test_registry_names():
    assert set(EXPERIMENTS) == {
        "spreading_speeds", "nagumo_dichotomy", "four_fronts", "three_fronts_cgl", "critical_beta",
        "terrace", "distance_scaling", "interface_saddle_node", "splice", "secondary_sweep", "fhn_smoke",
    }


def test_unknown_experiment_suggests_name():
    with pytest.raises(CatalogMissError, match="spreading_speeds"):
        run_experiment("spreading_sped")


def test_unknown_parameter_suggests_name():
    with pytest.raises(ConfigError, match="'mu'"):
        run_experiment("spreading_speeds", {"muu": 0.1})


def test_spreading_speeds_experiment():
    record = run_experiment("spreading_speeds", {"mu": 0.2})
    assert record.passed
    assert record.parameters == {"mu": 0.2, "alpha": 0.02}
    assert record.measured["skew_wake_c_lin"] == pytest.approx(2.0 * math.sqrt(1.2), abs=1e-8)
    assert record.runtime > 0.0


def test_four_fronts_rejects_large_mu():
    with pytest.raises(ConfigError):
        run_experiment("four_fronts", {"mu": 0.5})


def test_distance_scaling_rejects_unknown_family():
    with pytest.raises(ConfigError, match="skew_mu"):
        run_experiment("distance_scaling", {"family": "skew"})


@pytest.mark.slow
@pytest.mark.parametrize("name,params", [
    ("nagumo_dichotomy", {}),
    ("four_fronts", {}),
    ("three_fronts_cgl", {}),
    ("critical_beta", {}),
    ("terrace", {}),
    ("distance_scaling", {"family": "skew_mu"}),
    ("distance_scaling", {"family": "cgl_beta_above_ac"}),
    ("distance_scaling", {"family": "cgl_beta_below_ac"}),
    ("interface_saddle_node", {}),
    ("splice", {}),
    ("secondary_sweep", {}),
    ("fhn_smoke", {}),
])
def test_experiment_passes(name, params):
    record = run_experiment(name, params)
    failed = [c.name for c in record.criteria if not c.passed]
    assert record.passed, f"{name} failed: {failed}"

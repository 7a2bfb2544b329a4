"""Scenario loading: defaults, TOML files, environment and override precedence."""

from __future__ import annotations

from pathlib import Path

import pytest
from pydantic import ValidationError

from relayfield.config import ScenarioConfig, load_scenario, read_config_file, scenario_values
from relayfield.models import Protocol
from tests.conftest import scenario_toml


def test_defaults_build_a_valid_scenario():
    config = ScenarioConfig()
    assert config.lam == 1e-4
    assert config.geometry().relay == pytest.approx((2.0, 0.0))
    assert config.params().partitions == 64
    assert config.quad().rel_tol == 1e-8
    assert config.simulation().seed == 0
    assert config.sweep_protocols == list(Protocol)
    assert config.out_dir == Path("results")


def test_file_accepts_lambda(tmp_path):
    path = scenario_toml(tmp_path / "s.toml", **{"lambda": 3e-4, "k": 0.4, "partitions": 8})
    config = load_scenario(Path(path))
    assert config.lam == 3e-4
    assert config.k == 0.4
    assert config.partitions == 8


def test_file_rejects_tables(tmp_path):
    path = tmp_path / "nested.toml"
    path.write_text("[scenario]\nk = 0.4\n")
    with pytest.raises(ValueError, match="flat"):
        read_config_file(path)


def test_lambda_and_lam_together_is_an_error():
    with pytest.raises(ValueError, match="both"):
        scenario_values({"lambda": 1e-4, "lam": 1e-4})


def test_unknown_key_is_rejected(tmp_path):
    path = scenario_toml(tmp_path / "s.toml", k=0.4, kay=0.5)
    with pytest.raises(ValidationError):
        load_scenario(Path(path))


def test_precedence_flags_over_file_over_env(tmp_path, monkeypatch):
    monkeypatch.setenv("RELAYFIELD_SCENARIO_K", "0.3")
    monkeypatch.setenv("RELAYFIELD_SCENARIO_THRESHOLD", "7")
    assert load_scenario().k == 0.3

    path = Path(scenario_toml(tmp_path / "s.toml", k=0.4, seed=11))
    from_file = load_scenario(path)
    assert from_file.k == 0.4
    assert from_file.threshold == 7.0

    flagged = load_scenario(path, {"k": 0.5, "seed": None})
    assert flagged.k == 0.5
    assert flagged.seed == 11


@pytest.mark.parametrize(
    "values",
    [
        {"rho_mag": 1.0},
        {"w_c": 0.0},
        {"alpha": 2.0},
        {"threshold": 0.0},
        {"k": 1.0, "theta": 0.0},
        {"theta": 7.0},
        {"trials": 0},
        {"seed": 2**64},
        {"sweep_lambdas": [1e-4, 1e-5]},
        {"sweep_lambdas": []},
        {"rate_ks": [0.0]},
        {"rate_ks": [0.5, 1.0]},
        {"acceptance_lambdas": [1e-3, 1e-4]},
        {"acceptance_lambdas": []},
        {"acceptance_ks": [1.0]},
        {"region_x": (5.0, 1.0, 3)},
    ],
)
def test_invalid_scenarios(values):
    with pytest.raises(ValidationError):
        ScenarioConfig(**values)


def test_single_point_grid_is_allowed():
    config = ScenarioConfig(region_x=(2.0, 2.0, 1))
    assert config.region_x == (2.0, 2.0, 1)


def test_acceptance_grid_defaults():
    config = ScenarioConfig()
    assert config.acceptance_lambdas == [1e-5, 1e-4, 1e-3]
    assert config.acceptance_ks == [0.2, 0.9]
    assert config.acceptance_trends is True

"""Command line: subcommands, result files and exit codes."""

from __future__ import annotations

import csv
import json

import pytest

from relayfield import cli
from relayfield.errors import QuadratureAccuracyError
from relayfield.models import ValidationCheck, ValidationReport
from tests.conftest import scenario_toml


def _read_csv(path):
    with path.open() as fh:
        return list(csv.DictReader(fh))


def test_outage_writes_csv_and_json(tmp_path, capsys):
    code = cli.main(["outage", "--lambda", "0", "--partitions", "4", "--out", str(tmp_path)])
    assert code == cli.EXIT_OK
    rows = _read_csv(tmp_path / "outage.csv")
    assert [(r["protocol"], r["kind"]) for r in rows] == [
        ("df", "exact-analytic"),
        ("cf", "upper-bound"),
        ("cf", "lower-bound"),
        ("direct", "exact-analytic"),
        ("cutset", "lower-bound"),
    ]
    assert all(float(r["value"]) == 0.0 for r in rows)
    data = json.loads((tmp_path / "outage.json").read_text())
    assert data["scenario"]["lambda"] == 0.0
    assert data["wc_method"] == "tie"
    assert "W_c" in capsys.readouterr().out


def test_outage_with_monte_carlo_rows(tmp_path):
    code = cli.main(
        ["outage", "--lambda", "0", "--with-mc", "--trials", "50", "--out", str(tmp_path)]
    )
    assert code == cli.EXIT_OK
    rows = _read_csv(tmp_path / "outage.csv")
    mc = [r for r in rows if r["kind"] == "monte-carlo"]
    assert {r["protocol"] for r in mc} == {"df", "cf", "direct", "cutset"}
    assert all(r["stderr"] != "" for r in mc)


def test_rates_without_interferers_are_infinite(tmp_path):
    config = scenario_toml(
        tmp_path / "s.toml",
        **{"lambda": 0.0, "rate_ks": [0.5], "sweep_protocols": ["direct", "df"]},
    )
    code = cli.main(["rates", "--config", config, "--out", str(tmp_path)])
    assert code == cli.EXIT_OK
    rows = _read_csv(tmp_path / "rates.csv")
    assert [r["protocol"] for r in rows] == ["direct", "df"]
    assert all(r["t_max"] == "inf" for r in rows)


def test_sweep_writes_traces(tmp_path):
    config = scenario_toml(
        tmp_path / "s.toml",
        sweep_lambdas=[0.0, 1e-5],
        sweep_protocols=["direct"],
    )
    assert cli.main(["sweep", "--config", config, "--out", str(tmp_path)]) == cli.EXIT_OK
    rows = _read_csv(tmp_path / "sweep.csv")
    assert [float(r["lambda"]) for r in rows] == [0.0, 1e-5]
    traces = json.loads((tmp_path / "sweep.json").read_text())
    assert traces["axis"] == "lambda"
    assert len(traces["traces"]) == 2


def test_region_without_interferers(tmp_path):
    config = scenario_toml(
        tmp_path / "s.toml",
        **{"lambda": 0.0, "region_x": [0.0, 10.0, 3], "region_y": [0.0, 0.0, 1]},
    )
    assert cli.main(["region", "--config", config, "--out", str(tmp_path)]) == cli.EXIT_OK
    rows = _read_csv(tmp_path / "region.csv")
    assert [r["winner"] for r in rows] == ["invalid", "df", "invalid"]
    data = json.loads((tmp_path / "region.json").read_text())
    assert data["dominance_violations"] == []
    assert data["precedence"] == ["df", "cf", "direct"]


@pytest.mark.parametrize(
    "argv",
    [
        ["outage", "--rho", "1.5"],
        ["outage", "--k", "1", "--theta", "0"],
        ["outage", "--config", "does-not-exist.toml"],
        ["outage", "--trials", "0"],
    ],
)
def test_bad_configuration_exits_2(argv, tmp_path, capsys):
    assert cli.main([*argv, "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert "invalid configuration" in capsys.readouterr().err


def test_unparsable_config_file_exits_2(tmp_path):
    path = tmp_path / "broken.toml"
    path.write_text("k = = 3\n")
    assert cli.main(["outage", "--config", str(path), "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_failed_validation_exits_1(tmp_path, monkeypatch):
    report = ValidationReport(checks=[ValidationCheck(name="ordering", passed=False)])
    monkeypatch.setattr(cli, "run_validation", lambda config: report)
    assert cli.main(["validate", "--out", str(tmp_path)]) == cli.EXIT_VALIDATION
    data = json.loads((tmp_path / "validate.json").read_text())
    assert data["passed"] is False


def test_validate_passes_without_interferers(tmp_path):
    config = scenario_toml(
        tmp_path / "s.toml",
        **{
            "lambda": 0.0,
            "trials": 100,
            "partitions": 4,
            "acceptance_lambdas": [0.0],
            "acceptance_trends": False,
        },
    )
    code = cli.main(["validate", "--config", config, "--out", str(tmp_path)])
    assert code == cli.EXIT_OK
    rows = _read_csv(tmp_path / "validate.csv")
    assert all(r["passed"] == "true" for r in rows)
    assert "cf_union_mc[lambda=0,k=0.9]" in [r["check"] for r in rows]


def test_numerical_failure_has_its_own_exit_code(tmp_path, monkeypatch, caplog):
    def fail(config):
        raise QuadratureAccuracyError("coupling integral", estimate=0.1, error_bound=0.2)

    monkeypatch.setattr(cli.reports, "outage_report", fail)
    code = cli.main(["outage", "--out", str(tmp_path)])
    assert code == cli.EXIT_NUMERICAL
    assert code not in (cli.EXIT_VALIDATION, cli.EXIT_CONFIG)
    assert "coupling integral" in caplog.text


def test_reruns_are_byte_identical(tmp_path):
    config = scenario_toml(
        tmp_path / "s.toml",
        sweep_lambdas=[1e-5],
        sweep_protocols=["direct"],
        with_mc=True,
        trials=200,
        seed=99,
    )
    first, second = tmp_path / "a", tmp_path / "b"
    assert cli.main(["sweep", "--config", config, "--out", str(first)]) == cli.EXIT_OK
    assert cli.main(["sweep", "--config", config, "--out", str(second)]) == cli.EXIT_OK
    assert (first / "sweep.csv").read_bytes() == (second / "sweep.csv").read_bytes()
    assert (first / "sweep.json").read_bytes() == (second / "sweep.json").read_bytes()

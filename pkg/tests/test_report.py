"""Outage report assembly: analytic rows and their Monte Carlo companions."""

from __future__ import annotations

from relayfield.config import ScenarioConfig
from relayfield.models import EstimateKind, Protocol
from relayfield.services import analytic, report


def _config(tmp_path, **changes):
    values = {
        "lam": 1e-4,
        "partitions": 4,
        "with_mc": True,
        "trials": 200,
        "rel_tol": 1e-6,
        "optimize_wc": False,
        "out_dir": tmp_path,
    }
    return ScenarioConfig(**{**values, **changes})


def test_monte_carlo_cutset_row_runs_at_the_analytic_rho(tmp_path, monkeypatch):
    real = analytic.cutset_outage_lower

    def pinned(*args, **kwargs):
        estimate = real(*args, **kwargs)
        return estimate.model_copy(update={"metadata": {**estimate.metadata, "rho_star": 0.35}})

    monkeypatch.setattr(analytic, "cutset_outage_lower", pinned)
    result = report.outage_report(_config(tmp_path))
    cut = result.find(Protocol.cutset, EstimateKind.lower)
    assert cut.metadata["rho_star"] == 0.35
    assert result.find(Protocol.cutset, EstimateKind.monte_carlo).metadata["rho_mag"] == 0.35
    assert result.find(Protocol.df, EstimateKind.monte_carlo).metadata["rho_mag"] == 0.0


def test_monte_carlo_cf_row_runs_at_the_reported_w_c(tmp_path):
    result = report.outage_report(_config(tmp_path, w_c=0.25))
    assert result.w_c == 0.25
    assert result.find(Protocol.cf, EstimateKind.monte_carlo).metadata["w_c"] == 0.25
    assert len(result.estimates) == 5 + len(Protocol)

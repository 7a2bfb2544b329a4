"""Scenario-level orchestration shared by the CLI and the HTTP service."""

from __future__ import annotations

import logging
import math

import numpy as np

from relayfield.config import ScenarioConfig
from relayfield.errors import BracketExhaustedError
from relayfield.models import (
    OutageEstimate,
    OutageReport,
    Protocol,
    RateRow,
    RegionMap,
    SweepResult,
    make_geometry,
)
from relayfield.services import analytic, montecarlo, search

logger = logging.getLogger("relayfield.report")


def scenario_snapshot(config: ScenarioConfig) -> dict:
    data = config.model_dump(mode="json")
    data["lambda"] = data.pop("lam")
    data.pop("out_dir", None)
    return data


def outage_report(config: ScenarioConfig) -> OutageReport:
    """DF exact, CF upper/lower, direct and cut-set at one point, plus Monte Carlo rows."""
    network, geometry, params, quad = (
        config.network(),
        config.geometry(),
        config.params(),
        config.quad(),
    )
    if config.optimize_wc:
        opt = search.optimize_wc(network, geometry, params, quad, tight=config.tight_b_bound)
        w_c, wc_method = opt.w_c, opt.method
    else:
        w_c, wc_method = params.w_c, "fixed"
    cf_params = params.replace(w_c=w_c)

    cut = analytic.cutset_outage_lower(network, geometry, params, quad)
    estimates: list[OutageEstimate] = [
        analytic.df_outage(network, geometry, params, quad),
        analytic.cf_outage_upper(network, geometry, cf_params, quad, tight=config.tight_b_bound),
        analytic.cf_outage_lower(network, geometry, cf_params, quad),
        analytic.direct_outage(network, geometry.distance, params.threshold),
        cut,
    ]
    if config.with_mc:
        spec = config.simulation()
        # each Monte Carlo row runs at the parameters its analytic row reports
        mc_by_protocol = {
            Protocol.cf: cf_params,
            Protocol.cutset: params.replace(rho_mag=cut.metadata["rho_star"]),
        }
        for protocol in Protocol:
            mc_params = mc_by_protocol.get(protocol, params)
            estimates.append(
                montecarlo.estimate_outage(protocol, network, geometry, mc_params, spec)
            )
    logger.info("outage report: %d estimates", len(estimates))
    return OutageReport(
        scenario=scenario_snapshot(config),
        estimates=estimates,
        w_c=w_c,
        wc_method=wc_method,
    )


def lambda_sweep(config: ScenarioConfig) -> SweepResult:
    return search.sweep_lambda(
        config.sweep_protocols,
        config.sweep_lambdas,
        config.network(),
        config.geometry(),
        config.params(),
        config.quad(),
        threads=config.threads,
        tune_wc=config.optimize_wc,
        tight=config.tight_b_bound,
        simulation=config.simulation() if config.with_mc else None,
    )


def rate_table(config: ScenarioConfig, protocols: list[Protocol] | None = None) -> list[RateRow]:
    """T_max per (k, protocol) at the configured outage target."""
    network, params, quad = config.network(), config.params(), config.quad()
    rows = []
    for k in config.rate_ks:
        geometry = make_geometry(config.distance, k, config.theta, config.alpha)
        for protocol in protocols or config.sweep_protocols:
            try:
                t_max = search.max_rate(
                    protocol, config.rate_target, network, geometry, quad, params
                )
            except BracketExhaustedError as exc:
                logger.warning("k=%g %s: %s", k, protocol.value, exc)
                t_max = math.inf
            rows.append(RateRow(k=k, protocol=protocol, t_max=t_max))
    return rows


def grid_values(spec: tuple[float, float, int]) -> list[float]:
    lo, hi, count = spec
    return np.linspace(lo, hi, count).tolist()


def region(config: ScenarioConfig) -> RegionMap:
    return search.region_map(
        config.network(),
        grid_values(config.region_x),
        grid_values(config.region_y),
        config.params(),
        config.quad(),
        distance=config.distance,
        threads=config.threads,
    )

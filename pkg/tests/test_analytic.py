"""Closed-form and bound outage probabilities."""

from __future__ import annotations

import math

import pytest

from relayfield.errors import DomainError
from relayfield.models import (
    EstimateKind,
    NetworkModel,
    Protocol,
    ProtocolParams,
    QuadratureSpec,
)
from relayfield.services import analytic, search
from relayfield.services.interference import constant_C, joint_exponent, marginal_exponent


def test_fv_ccdf_branches():
    assert analytic.fv_ccdf(0.0, 1.0, 2.0) == 1.0
    assert analytic.fv_ccdf(1.0, 1.0, 2.0) == pytest.approx(2 * math.exp(-0.5) - math.exp(-1))
    assert analytic.fv_ccdf(2.0, 1.0, 1.0) == pytest.approx(3 * math.exp(-2))
    assert analytic.fv_ccdf(2.0, 0.0, 1.0) == pytest.approx(math.exp(-2))


def test_fv_ccdf_is_continuous_at_the_tie():
    tied = analytic.fv_ccdf(1.5, 1.0, 1.0)
    near = analytic.fv_ccdf(1.5, 1.0 - 1e-7, 1.0)
    assert near == pytest.approx(tied, abs=1e-6)


def test_fv_ccdf_rejects_bad_arguments():
    with pytest.raises(DomainError):
        analytic.fv_ccdf(-1.0, 1.0, 2.0)
    with pytest.raises(DomainError):
        analytic.fv_ccdf(1.0, 2.0, 1.0)


def test_df_mu_limits(geometry):
    mu1, mu2 = analytic.df_mu(0.0, geometry.l_sd, geometry.l_rd)
    assert (mu1, mu2) == pytest.approx(sorted((geometry.l_sd, geometry.l_rd)))
    mu1, mu2 = analytic.df_mu(1.0, geometry.l_sd, geometry.l_rd)
    assert mu1 == 0.0
    assert mu2 == pytest.approx(geometry.l_sd + geometry.l_rd)
    mu = analytic.df_intermediates(geometry, 0.5)
    assert mu.mu3 == pytest.approx(0.75 * geometry.l_sr)
    assert mu.mu1 * mu.mu2 == pytest.approx(0.75 * geometry.l_sd * geometry.l_rd)


def test_df_outage_without_interferers(empty_network, geometry, params):
    estimate = analytic.df_outage(empty_network, geometry, params)
    assert estimate.value == 0.0
    assert estimate.kind is EstimateKind.exact
    assert estimate.protocol is Protocol.df


def test_df_outage_rejects_full_correlation(network, geometry, params):
    with pytest.raises(DomainError):
        analytic.df_outage(network, geometry, params.replace(rho_mag=1.0))


def test_df_outage_grows_with_density(geometry, params, quad):
    low = analytic.df_outage(NetworkModel(lam=1e-5), geometry, params, quad).value
    high = analytic.df_outage(NetworkModel(lam=1e-4), geometry, params, quad).value
    assert 0.0 < low < high < 1.0


def test_df_outage_tied_means_branch(network, equilateral_geometry, params):
    quad = QuadratureSpec(rel_tol=1e-7)
    tied = analytic.df_outage(network, equilateral_geometry, params, quad)
    assert tied.metadata["branch"] == "coincident"
    nearby = analytic.df_outage(
        network, equilateral_geometry, params.replace(rho_mag=1e-3), quad
    )
    assert nearby.metadata["branch"] == "distinct"
    assert tied.value == pytest.approx(nearby.value, abs=2e-3)


def test_df_rho_scan(network, geometry, params, quad):
    scan = analytic.df_rho_scan(network, geometry, params, quad)
    assert [rho for rho, _ in scan] == list(analytic.RHO_GRID)
    assert len(scan) == 20
    values = [v for _, v in scan]
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:], strict=False))
    assert values[-1] > values[0]
    assert analytic.df_optimal_rho(network, geometry, params, quad) == 0.0


def test_cf_bounds_are_ordered(network, midpoint_geometry, params, quad):
    upper = analytic.cf_outage_upper(network, midpoint_geometry, params, quad)
    lower = analytic.cf_outage_lower(network, midpoint_geometry, params, quad)
    assert upper.kind is EstimateKind.upper
    assert lower.kind is EstimateKind.lower
    assert 0.0 <= lower.value <= upper.value <= 1.0
    assert upper.metadata["p_a_upper"] + upper.metadata["p_b_upper"] >= upper.value


def test_cf_refinement_narrows_the_gap(network, midpoint_geometry, params, quad):
    def gap(n):
        p = params.replace(partitions=n)
        return analytic.cf_event_a_upper(
            network, midpoint_geometry, p, quad
        ) - analytic.cf_event_a_lower(network, midpoint_geometry, p, quad)

    assert gap(8) < gap(2)


def test_cf_single_partition_lower_bound_is_empty(network, geometry, params, quad):
    one = params.replace(partitions=1)
    assert analytic.cf_event_a_lower(network, geometry, one, quad) == 0.0


def test_cf_second_event_needs_compression_noise(network, geometry, params):
    with pytest.raises(DomainError):
        analytic.cf_event_b_upper(network, geometry, params.replace(w_c=0.0))


def test_cf_second_event_shrinks_with_compression_noise(network, geometry, params, quad):
    small = analytic.cf_event_b_upper(network, geometry, params.replace(w_c=1e-3), quad)
    large = analytic.cf_event_b_upper(network, geometry, params.replace(w_c=1e3), quad)
    assert large < small


def test_cf_tight_second_event(network, midpoint_geometry, params, quad):
    loose = analytic.cf_event_b_upper(network, midpoint_geometry, params, quad)
    tight = analytic.cf_event_b_upper(network, midpoint_geometry, params, quad, tight=True)
    assert 0.0 <= tight <= 1.0
    assert tight <= loose * 1.05 + 1e-9


def test_cf_bound_parts(network, geometry, params, quad):
    parts = analytic.cf_bound_parts(network, geometry, params, quad)
    assert parts.p_a_lower <= parts.p_a_upper
    assert parts.n_partitions == params.partitions


def test_direct_outage_closed_form(network):
    estimate = analytic.direct_outage(network, 10.0, 3.0)
    expected = 1.0 - math.exp(-1e-4 * constant_C(4.0) * math.sqrt(3.0) * 100.0)
    assert estimate.value == pytest.approx(expected)
    assert analytic.direct_outage(NetworkModel(lam=0.0), 10.0, 3.0).value == 0.0
    with pytest.raises(DomainError):
        analytic.direct_outage(network, 10.0, 0.0)


def test_direct_threshold_inversion(network):
    t_max = analytic.direct_max_threshold(network, 10.0, 1e-2)
    assert analytic.direct_outage(network, 10.0, t_max).value == pytest.approx(1e-2)
    assert analytic.direct_max_threshold(NetworkModel(lam=0.0), 10.0, 1e-2) == math.inf
    with pytest.raises(DomainError):
        analytic.direct_max_threshold(network, 10.0, 1.0)


def test_cutset_without_interferers(empty_network, geometry, params):
    estimate = analytic.cutset_outage_lower(empty_network, geometry, params)
    assert estimate.value == 0.0
    assert estimate.metadata["rho_star"] == 0.0


def test_cutset_lies_below_df(network, geometry, params, quad):
    cut = analytic.cutset_outage_lower(network, geometry, params, quad)
    df = analytic.df_outage(network, geometry, params, quad)
    assert cut.kind is EstimateKind.lower
    assert cut.value <= df.value + 1e-9
    assert cut.metadata["rho_star"] in analytic.RHO_GRID
    assert cut.value == pytest.approx(max(cut.metadata["p_first"], cut.metadata["p_second"]))
    assert cut.metadata["trace"][0][0] == 0.0


def test_direct_outage_reference_point():
    dense = NetworkModel(lam=1e-3)
    assert analytic.direct_outage(dense, 10.0, 3.0).value == pytest.approx(0.574607, abs=1e-5)


def test_df_outage_grows_with_threshold(network, geometry, params, quad):
    low = analytic.df_outage(network, geometry, params.replace(threshold=1.0), quad).value
    high = analytic.df_outage(network, geometry, params, quad).value
    assert low < high


def test_cf_single_partition_upper_bound_is_the_square(network, geometry, params, quad):
    # N = 1 covers the whole square {SIR_r' < T, SIR_d < T}
    one = params.replace(partitions=1, w_c=1e-3)
    t, w = one.threshold, one.w_c
    compression = t * w / geometry.l_sr
    g_relay = compression + marginal_exponent(t / geometry.l_sr, network)
    g_dest = marginal_exponent(t / geometry.l_sd, network)
    g_both = compression + joint_exponent(
        t / geometry.l_sd, t / geometry.l_sr, geometry, network, quad
    )
    square = 1.0 - math.exp(-g_relay) - math.exp(-g_dest) + math.exp(-g_both)
    assert analytic.cf_event_a_upper(network, geometry, one, quad) == pytest.approx(
        square, rel=1e-9
    )


def test_cf_bounds_tighten_on_nested_partitions(network, midpoint_geometry, params, quad):
    uppers, lowers = [], []
    for n in (1, 2, 4, 8, 16):
        p = params.replace(partitions=n, w_c=1e-3)
        uppers.append(analytic.cf_event_a_upper(network, midpoint_geometry, p, quad))
        lowers.append(analytic.cf_event_a_lower(network, midpoint_geometry, p, quad))
    assert all(b <= a + 1e-7 for a, b in zip(uppers, uppers[1:], strict=False))
    assert all(b >= a - 1e-7 for a, b in zip(lowers, lowers[1:], strict=False))
    assert lowers[-1] <= uppers[-1]
    assert uppers[-1] < uppers[0]


@pytest.mark.slow
def test_cf_bounds_within_ten_percent_near_the_source(network, geometry, quad):
    params = ProtocolParams(threshold=3.0, partitions=64)
    opt = search.optimize_wc(network, geometry, params, quad)
    tuned = params.replace(w_c=opt.w_c)
    upper = analytic.cf_outage_upper(network, geometry, tuned, quad).value
    lower = analytic.cf_outage_lower(network, geometry, tuned, quad).value
    assert upper > 0.0
    assert (upper - lower) / upper < 0.1

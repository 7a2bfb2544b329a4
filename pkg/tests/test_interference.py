"""Marginal and joint Laplace transforms of the interference field."""

from __future__ import annotations

import math

import pytest

from relayfield.errors import DivergenceError, DomainError, QuadratureAccuracyError
from relayfield.models import JointTransformArgs, NetworkModel, QuadratureSpec
from relayfield.services import interference
from relayfield.services.interference import (
    constant_C,
    coupling_between,
    joint_exponent,
    laplace_joint,
    laplace_marginal,
    marginal_exponent,
    pgfl_joint_exponent,
)


def test_constant_reference_values():
    assert constant_C(4.0) == pytest.approx(math.pi**2 / 2.0, rel=1e-12)
    assert constant_C(3.0) == pytest.approx(4.0 * math.pi**2 / (3.0 * math.sqrt(3.0)), rel=1e-12)
    assert constant_C(3.0) == pytest.approx(7.5977, abs=1e-4)


@pytest.mark.parametrize("alpha", [2.0, 1.5])
def test_constant_diverges_at_or_below_two(alpha):
    with pytest.raises(DivergenceError):
        constant_C(alpha)


def test_marginal_transform(network):
    assert laplace_marginal(0.0, network) == 1.0
    assert laplace_marginal(5.0, NetworkModel(lam=0.0)) == 1.0
    expected = network.lam * constant_C(4.0) * math.sqrt(1e4)
    assert marginal_exponent(1e4, network) == pytest.approx(expected)
    with pytest.raises(DomainError):
        marginal_exponent(-1.0, network)


def test_coincident_points_match_closed_form(quad):
    for omega in (1.0, 50.0):
        f = coupling_between(omega, omega, (0.0, 0.0), (0.0, 0.0), 4.0, quad)
        assert f == pytest.approx(interference.coincident_coupling(omega, 4.0), rel=1e-4)


def test_coupling_vanishes_when_one_argument_is_zero(geometry):
    assert coupling_between(0.0, 3.0, geometry.destination, geometry.relay, 4.0) == 0.0


def test_coupling_is_symmetric_and_cached(quad, midpoint_geometry):
    d, r = midpoint_geometry.destination, midpoint_geometry.relay
    first = coupling_between(2e3, 8e3, d, r, 4.0, quad)
    second = coupling_between(8e3, 2e3, r, d, 4.0, quad)
    assert first == second
    info = interference.coupling_cache_info()
    assert info.misses == 1
    assert info.hits == 1


def test_coupling_bounded_by_smaller_marginal(quad, midpoint_geometry):
    d, r = midpoint_geometry.destination, midpoint_geometry.relay
    f = coupling_between(1e3, 1e4, d, r, 4.0, quad)
    assert 0.0 < f <= constant_C(4.0) * 1e3**0.5


@pytest.mark.parametrize(("s1", "s2"), [(0.1, 0.1), (1.0, 10.0), (10.0, 1.0)])
def test_joint_transform_matches_direct_pgfl_integral(s1, s2, network, geometry, quad):
    omega1 = 3.0 * s1 / geometry.l_sd
    omega2 = 3.0 * s2 / geometry.l_sr
    via_f = joint_exponent(omega1, omega2, geometry, network, quad)
    direct = pgfl_joint_exponent(
        omega1, omega2, geometry.destination, geometry.relay, network, quad
    )
    assert via_f == pytest.approx(direct, rel=1e-4)


def test_joint_transform_sandwich(network, midpoint_geometry, quad):
    args = JointTransformArgs(
        omega1=3e4, omega2=5e3, geometry=midpoint_geometry, network=network
    )
    joint = laplace_joint(args, quad)
    m1 = laplace_marginal(args.omega1, network)
    m2 = laplace_marginal(args.omega2, network)
    assert m1 * m2 <= joint * (1 + 1e-6)
    assert joint <= min(m1, m2) * (1 + 1e-6)


def test_joint_transform_reduces_to_marginal(network, geometry, quad):
    args = JointTransformArgs(omega1=3e4, omega2=0.0, geometry=geometry, network=network)
    assert laplace_joint(args, quad) == pytest.approx(laplace_marginal(3e4, network))


def test_joint_exponent_skips_coupling_past_underflow(geometry):
    dense = NetworkModel(lam=10.0)
    exponent = joint_exponent(1e6, 1e6, geometry, dense)
    assert exponent == pytest.approx(marginal_exponent(1e6, dense))
    assert interference.coupling_cache_info().misses == 0


def test_evaluation_budget_raises(midpoint_geometry):
    tight = QuadratureSpec(rel_tol=1e-8, max_evaluations=1000)
    with pytest.raises(QuadratureAccuracyError) as excinfo:
        coupling_between(
            1e3, 1e4, midpoint_geometry.destination, midpoint_geometry.relay, 4.0, tight
        )
    assert "budget" in str(excinfo.value)


def test_oracle_agrees_with_transform_on_args(network, midpoint_geometry, quad):
    args = JointTransformArgs(
        omega1=2e4, omega2=2e4, geometry=midpoint_geometry, network=network
    )
    assert interference.pgfl_joint_oracle(args, quad) == pytest.approx(
        laplace_joint(args, quad), rel=1e-5
    )
    f = interference.coupling_integral_f(args, quad)
    assert f == coupling_between(
        2e4, 2e4, midpoint_geometry.destination, midpoint_geometry.relay, 4.0, quad
    )


def test_joint_exponent_is_symmetric_under_swap(network, midpoint_geometry, quad):
    d, r = midpoint_geometry.destination, midpoint_geometry.relay
    forward = pgfl_joint_exponent(2e3, 9e3, d, r, network, quad)
    swapped = pgfl_joint_exponent(9e3, 2e3, r, d, network, quad)
    assert swapped == pytest.approx(forward, rel=1e-5)

    f = coupling_between(2e3, 9e3, d, r, 4.0, quad)
    interference.clear_coupling_cache()
    g = coupling_between(9e3, 2e3, r, d, 4.0, quad)
    assert interference.coupling_cache_info().misses == 1
    assert g == pytest.approx(f, rel=1e-6)


@pytest.mark.parametrize("angle", [0.0, 1.0])
def test_joint_exponent_is_invariant_under_rigid_motion(angle, network, geometry, quad):
    def moved(point):
        x, y = point
        c, s = math.cos(angle), math.sin(angle)
        return (c * x - s * y + 37.0, s * x + c * y - 12.5)

    d, r = geometry.destination, geometry.relay
    base = pgfl_joint_exponent(5e3, 4e4, d, r, network, quad)
    assert pgfl_joint_exponent(5e3, 4e4, moved(d), moved(r), network, quad) == pytest.approx(
        base, rel=1e-5
    )

    f = coupling_between(5e3, 4e4, d, r, 4.0, quad)
    interference.clear_coupling_cache()
    g = coupling_between(5e3, 4e4, moved(d), moved(r), 4.0, quad)
    assert interference.coupling_cache_info().misses == 1
    assert g == pytest.approx(f, rel=1e-6)

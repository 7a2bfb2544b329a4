"""Outage probabilities in closed or bound form: DF exact, CF bounds, direct, cut-set."""

from __future__ import annotations

import logging
import math
import warnings
from collections.abc import Callable

from numpy.polynomial.laguerre import laggauss
from scipy import integrate
from scipy.integrate import IntegrationWarning

from relayfield.errors import DomainError, NumericalRangeError, QuadratureAccuracyError
from relayfield.models import (
    CfBoundParts,
    DfIntermediates,
    EstimateKind,
    LinkGeometry,
    NetworkModel,
    OutageEstimate,
    Protocol,
    ProtocolParams,
    QuadratureSpec,
)
from relayfield.services.interference import constant_C, joint_exponent, marginal_exponent

logger = logging.getLogger("relayfield.analytic")

RHO_GRID: tuple[float, ...] = tuple(round(0.05 * i, 2) for i in range(20))

# |mu2 - mu1| at or below this fraction of mu2 selects the Erlang branch.
MU_TIE_TOL = 1e-12
RANGE_SLACK = 1e-6
FD_STEP = 1e-4

_DEFAULT_QUAD = QuadratureSpec()


def snapshot(
    network: NetworkModel, geometry: LinkGeometry | None, params: ProtocolParams | None
) -> dict[str, float | int]:
    out: dict[str, float | int] = {"lambda": network.lam, "alpha": network.alpha}
    if geometry is not None:
        out.update(distance=geometry.distance, k=geometry.k, theta=geometry.theta)
    if params is not None:
        out.update(threshold=params.threshold)
    return out


def _checked(value: float, label: str) -> float:
    if not -RANGE_SLACK <= value <= 1.0 + RANGE_SLACK:
        raise NumericalRangeError(f"{label} evaluated to {value!r}, outside [0, 1]")
    return min(max(value, 0.0), 1.0)


def _clamped(value: float) -> float:
    return min(max(value, 0.0), 1.0)


def _quad_1d(
    func: Callable[[float], float], lo: float, hi: float, quad: QuadratureSpec, label: str
) -> float:
    with warnings.catch_warnings(record=True) as messages:
        warnings.simplefilter("always", category=IntegrationWarning)
        value, error = integrate.quad(func, lo, hi, epsabs=0.0, epsrel=quad.rel_tol, limit=200)
    for message in messages:
        logger.warning("%s: %s", label, message.message)
    if error > math.sqrt(quad.rel_tol) * abs(value) and error > 1e-15:
        raise QuadratureAccuracyError(
            f"{label}: tolerance not reached", estimate=value, error_bound=error
        )
    return value


# ---------------------------------------------------------------------------
# Decode-and-forward
# ---------------------------------------------------------------------------


def fv_ccdf(s: float, mu1: float, mu2: float) -> float:
    """P(V > s) for V a sum of independent exponentials with means mu1 <= mu2."""
    if not s >= 0:
        raise DomainError(f"fv_ccdf needs s >= 0, got {s}")
    if not (0 <= mu1 <= mu2 and mu2 > 0):
        raise DomainError(f"need 0 <= mu1 <= mu2 and mu2 > 0, got ({mu1}, {mu2})")
    if s == 0:
        return 1.0
    if mu2 - mu1 <= MU_TIE_TOL * mu2:
        x = s / mu2
        return (1.0 + x) * math.exp(-x)
    if mu1 == 0:
        return math.exp(-s / mu2)
    return (mu2 * math.exp(-s / mu2) - mu1 * math.exp(-s / mu1)) / (mu2 - mu1)


def df_mu(rho_mag: float, l_sd: float, l_rd: float) -> tuple[float, float]:
    if not 0 <= rho_mag <= 1:
        raise DomainError(f"|rho| must lie in [0, 1], got {rho_mag}")
    if not (l_sd > 0 and l_rd > 0):
        raise DomainError("path-loss gains must be positive")
    disc = math.sqrt((l_sd - l_rd) ** 2 + 4.0 * l_sd * l_rd * rho_mag * rho_mag)
    mu2 = 0.5 * (l_sd + l_rd + disc)
    # mu1 from the product identity avoids the cancellation in (S - disc) / 2.
    mu1 = l_sd * l_rd * (1.0 - rho_mag * rho_mag) / mu2
    return min(mu1, mu2), mu2


def df_intermediates(geometry: LinkGeometry, rho_mag: float) -> DfIntermediates:
    mu1, mu2 = df_mu(rho_mag, geometry.l_sd, geometry.l_rd)
    return DfIntermediates(mu1=mu1, mu2=mu2, mu3=geometry.l_sr * (1.0 - rho_mag * rho_mag))


def df_outage(
    network: NetworkModel,
    geometry: LinkGeometry,
    params: ProtocolParams,
    quad: QuadratureSpec | None = None,
) -> OutageEstimate:
    quad = quad or _DEFAULT_QUAD
    if params.rho_mag >= 1:
        raise DomainError("DF needs |rho| < 1")
    mu = df_intermediates(geometry, params.rho_mag)
    t = params.threshold
    meta = snapshot(network, geometry, params) | {
        "rho_mag": params.rho_mag,
        "mu1": mu.mu1,
        "mu2": mu.mu2,
        "mu3": mu.mu3,
    }
    if network.lam == 0:
        return OutageEstimate(
            protocol=Protocol.df, kind=EstimateKind.exact, value=0.0, metadata=meta
        )

    omega_r = t / mu.mu3

    def exponent(omega_d: float) -> float:
        return joint_exponent(omega_d, omega_r, geometry, network, quad)

    if mu.mu2 - mu.mu1 <= MU_TIE_TOL * mu.mu2:
        # 1 - E[exp(-w_r I_r) (1 + w I_d) exp(-w I_d)] = 1 - (L - w dL/dw)
        w = t / mu.mu1
        h = FD_STEP * w
        lval = math.exp(-exponent(w))
        slope = (math.exp(-exponent(w + h)) - math.exp(-exponent(w - h))) / (2.0 * h)
        raw = 1.0 - (lval - w * slope)
        meta["branch"] = "coincident"
    else:
        miss2 = -math.expm1(-exponent(t / mu.mu2))
        miss1 = -math.expm1(-exponent(t / mu.mu1)) if mu.mu1 > 0 else 0.0
        raw = (mu.mu2 * miss2 - mu.mu1 * miss1) / (mu.mu2 - mu.mu1)
        meta["branch"] = "distinct"

    value = _checked(raw, "DF outage")
    logger.debug(
        "df_outage lam=%g k=%g rho=%g -> %.10g", network.lam, geometry.k, params.rho_mag, value
    )
    return OutageEstimate(protocol=Protocol.df, kind=EstimateKind.exact, value=value, metadata=meta)


def df_rho_scan(
    network: NetworkModel,
    geometry: LinkGeometry,
    params: ProtocolParams,
    quad: QuadratureSpec | None = None,
) -> list[tuple[float, float]]:
    return [
        (rho, df_outage(network, geometry, params.replace(rho_mag=rho), quad).value)
        for rho in RHO_GRID
    ]


def df_optimal_rho(
    network: NetworkModel,
    geometry: LinkGeometry,
    params: ProtocolParams,
    quad: QuadratureSpec | None = None,
) -> float:
    """Grid argmin of the DF outage over |rho|; ties go to the smaller |rho|."""
    best_rho, best = 0.0, math.inf
    for rho, value in df_rho_scan(network, geometry, params, quad):
        if value < best:
            best_rho, best = rho, value
    return best_rho


# ---------------------------------------------------------------------------
# Compress-and-forward
# ---------------------------------------------------------------------------


class _CfExponent:
    """g(a, b) = -ln P(SIR_r' >= a, SIR_d >= b), memoized within one bound evaluation."""

    def __init__(
        self,
        network: NetworkModel,
        geometry: LinkGeometry,
        w_c: float,
        quad: QuadratureSpec,
    ) -> None:
        self.network = network
        self.geometry = geometry
        self.w_c = w_c
        self.quad = quad
        self._seen: dict[tuple[float, float], float] = {}

    def __call__(self, a: float, b: float) -> float:
        key = (a, b)
        if key not in self._seen:
            g = self.geometry
            self._seen[key] = a * self.w_c / g.l_sr + joint_exponent(
                b / g.l_sd, a / g.l_sr, g, self.network, self.quad
            )
        return self._seen[key]

    def strip(self, a_lo: float, a_hi: float, b: float) -> float:
        """P(a_lo <= SIR_r' < a_hi, SIR_d >= b)."""
        g_lo = self(a_lo, b)
        return math.exp(-g_lo) * -math.expm1(-max(self(a_hi, b) - g_lo, 0.0))


def _edges(threshold: float, partitions: int) -> list[float]:
    return [n * threshold / partitions for n in range(partitions + 1)]


def cf_event_a_upper(
    network: NetworkModel,
    geometry: LinkGeometry,
    params: ProtocolParams,
    quad: QuadratureSpec | None = None,
) -> float:
    """Outer staircase cover of {SIR_r' + SIR_d < T} with N strips."""
    if network.lam == 0:
        return 0.0
    t, n_parts = params.threshold, params.partitions
    g = _CfExponent(network, geometry, params.w_c, quad or _DEFAULT_QUAD)
    edges = _edges(t, n_parts)
    below = -math.expm1(-g(t, 0.0))
    covered = sum(g.strip(edges[n], edges[n + 1], edges[n_parts - n]) for n in range(n_parts))
    return _clamped(below - covered)


def cf_event_a_lower(
    network: NetworkModel,
    geometry: LinkGeometry,
    params: ProtocolParams,
    quad: QuadratureSpec | None = None,
) -> float:
    """Inner staircase of {SIR_r' + SIR_d < T}; the N = 1 cover is empty."""
    if network.lam == 0:
        return 0.0
    t, n_parts = params.threshold, params.partitions
    g = _CfExponent(network, geometry, params.w_c, quad or _DEFAULT_QUAD)
    edges = _edges(t, n_parts)
    total = 0.0
    for n in range(n_parts - 1):
        height = edges[n_parts - n - 1]
        total += g.strip(edges[n], edges[n + 1], 0.0) - g.strip(edges[n], edges[n + 1], height)
    return _clamped(total)


def _compression_gains(geometry: LinkGeometry, params: ProtocolParams) -> tuple[float, float]:
    if not params.w_c > 0:
        raise DomainError("the CF second-event bound needs W_c > 0")
    t = params.threshold
    scale = (1.0 + t) / (t * params.w_c * geometry.l_rd)
    # (paired with I_d, paired with I_r)
    return scale * geometry.l_sr, scale * geometry.l_sd


def _faded_miss(gain: float, network: NetworkModel, quad: QuadratureSpec) -> float:
    """1 - E[L_I(gain * H)] for H unit-mean exponential."""
    if gain == 0 or network.lam == 0:
        return 0.0
    lc = network.lam * constant_C(network.alpha)
    delta = network.delta

    def integrand(h: float) -> float:
        return math.exp(-h) * -math.expm1(-lc * (gain * h) ** delta)

    return _quad_1d(integrand, 0.0, math.inf, quad, "faded transform")


def cf_event_b_upper(
    network: NetworkModel,
    geometry: LinkGeometry,
    params: ProtocolParams,
    quad: QuadratureSpec | None = None,
    *,
    tight: bool = False,
) -> float:
    """Bound on P(not A_CF and B_CF).

    The default drops the coupling term and factorizes into two 1-D integrals.
    ``tight`` keeps the joint transform and integrates both fades with a tensor
    Gauss-Laguerre rule.
    """
    quad = quad or _DEFAULT_QUAD
    gain_d, gain_r = _compression_gains(geometry, params)
    if network.lam == 0:
        return 0.0
    if tight:
        nodes, weights = laggauss(quad.laguerre_order)
        total = 0.0
        for x, wx in zip(nodes, weights, strict=True):
            for y, wy in zip(nodes, weights, strict=True):
                e = joint_exponent(gain_d * float(x), gain_r * float(y), geometry, network, quad)
                total += float(wx * wy) * -math.expm1(-e)
        return _clamped(total)
    miss_d = _faded_miss(gain_d, network, quad)
    miss_r = _faded_miss(gain_r, network, quad)
    return _clamped(miss_d + miss_r - miss_d * miss_r)


def cf_bound_parts(
    network: NetworkModel,
    geometry: LinkGeometry,
    params: ProtocolParams,
    quad: QuadratureSpec | None = None,
    *,
    tight: bool = False,
) -> CfBoundParts:
    upper = cf_event_a_upper(network, geometry, params, quad)
    lower = min(cf_event_a_lower(network, geometry, params, quad), upper)
    return CfBoundParts(
        p_a_upper=upper,
        p_a_lower=lower,
        p_b_upper=cf_event_b_upper(network, geometry, params, quad, tight=tight),
        n_partitions=params.partitions,
    )


def cf_outage_upper(
    network: NetworkModel,
    geometry: LinkGeometry,
    params: ProtocolParams,
    quad: QuadratureSpec | None = None,
    *,
    tight: bool = False,
) -> OutageEstimate:
    a_upper = cf_event_a_upper(network, geometry, params, quad)
    b_upper = cf_event_b_upper(network, geometry, params, quad, tight=tight)
    meta = snapshot(network, geometry, params) | {
        "w_c": params.w_c,
        "partitions": params.partitions,
        "p_a_upper": a_upper,
        "p_b_upper": b_upper,
        "tight_b_bound": tight,
    }
    return OutageEstimate(
        protocol=Protocol.cf,
        kind=EstimateKind.upper,
        value=min(1.0, a_upper + b_upper),
        metadata=meta,
    )


def cf_outage_lower(
    network: NetworkModel,
    geometry: LinkGeometry,
    params: ProtocolParams,
    quad: QuadratureSpec | None = None,
) -> OutageEstimate:
    meta = snapshot(network, geometry, params) | {
        "w_c": params.w_c,
        "partitions": params.partitions,
    }
    return OutageEstimate(
        protocol=Protocol.cf,
        kind=EstimateKind.lower,
        value=cf_event_a_lower(network, geometry, params, quad),
        metadata=meta,
    )


# ---------------------------------------------------------------------------
# Direct transmission and the cut-set bound
# ---------------------------------------------------------------------------


def direct_exponent(network: NetworkModel, distance: float, threshold: float) -> float:
    if not distance > 0:
        raise DomainError(f"distance must be positive, got {distance}")
    if not threshold > 0:
        raise DomainError(f"threshold must be positive, got {threshold}")
    return network.lam * threshold**network.delta * distance**2 * constant_C(network.alpha)


def direct_outage(network: NetworkModel, distance: float, threshold: float) -> OutageEstimate:
    value = -math.expm1(-direct_exponent(network, distance, threshold))
    return OutageEstimate(
        protocol=Protocol.direct,
        kind=EstimateKind.exact,
        value=value,
        metadata={
            "lambda": network.lam,
            "alpha": network.alpha,
            "distance": distance,
            "threshold": threshold,
        },
    )


def direct_max_threshold(network: NetworkModel, distance: float, target: float) -> float:
    """Largest T whose direct-transmission outage stays at ``target``."""
    if not 0 < target < 1:
        raise DomainError(f"target outage must lie in (0, 1), got {target}")
    if network.lam == 0:
        return math.inf
    scale = network.lam * distance**2 * constant_C(network.alpha)
    return (-math.log1p(-target) / scale) ** (network.alpha / 2.0)


def _cutset_destination_term(
    rho: float, threshold: float, geometry: LinkGeometry, network: NetworkModel
) -> float:
    """P(V < T I_d): the coherent-combining event, marginal in I_d."""
    mu1, mu2 = df_mu(rho, geometry.l_sd, geometry.l_rd)
    e2 = marginal_exponent(threshold / mu2, network)
    if mu2 - mu1 <= MU_TIE_TOL * mu2:
        return _clamped(-math.expm1(-e2) - network.delta * e2 * math.exp(-e2))
    if mu1 == 0:
        return _clamped(-math.expm1(-e2))
    e1 = marginal_exponent(threshold / mu1, network)
    return _checked(
        (mu2 * -math.expm1(-e2) - mu1 * -math.expm1(-e1)) / (mu2 - mu1), "cut-set term"
    )


def cutset_outage_lower(
    network: NetworkModel,
    geometry: LinkGeometry,
    params: ProtocolParams,
    quad: QuadratureSpec | None = None,
) -> OutageEstimate:
    """min over |rho| of max(P1, P2).

    P1 is the CF inner-staircase bound with W_c = 0 at threshold T / (1 - |rho|^2)
    and can only grow with |rho|, so the scan stops once it reaches the best value.
    """
    meta: dict = snapshot(network, geometry, params) | {"partitions": params.partitions}
    if network.lam == 0:
        meta.update(rho_star=0.0, p_first=0.0, p_second=0.0, trace=[])
        return OutageEstimate(
            protocol=Protocol.cutset, kind=EstimateKind.lower, value=0.0, metadata=meta
        )

    t = params.threshold
    best, rho_star, p_first, p_second = math.inf, 0.0, 0.0, 0.0
    trace: list[list[float | None]] = []
    for rho in RHO_GRID:
        p2 = _cutset_destination_term(rho, t, geometry, network)
        if p2 >= best:
            trace.append([rho, None, p2])
            continue
        scaled = params.replace(threshold=t / (1.0 - rho * rho), w_c=0.0)
        p1 = cf_event_a_lower(network, geometry, scaled, quad)
        trace.append([rho, p1, p2])
        if max(p1, p2) < best:
            best, rho_star, p_first, p_second = max(p1, p2), rho, p1, p2
        if p1 >= best:
            break

    meta.update(rho_star=rho_star, p_first=p_first, p_second=p_second, trace=trace)
    return OutageEstimate(
        protocol=Protocol.cutset, kind=EstimateKind.lower, value=_clamped(best), metadata=meta
    )

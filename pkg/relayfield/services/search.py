"""Parameter optimization and experiment grids: W_c search, max rate, lambda sweeps, regions."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from typing import NamedTuple

import numpy as np
from joblib import Parallel, delayed
from scipy import optimize

from relayfield.errors import BracketExhaustedError, DegenerateGeometryError, DomainError
from relayfield.models import (
    TAU,
    EstimateKind,
    LinkGeometry,
    NetworkModel,
    OutageEstimate,
    Protocol,
    ProtocolParams,
    QuadratureSpec,
    RegionCell,
    RegionMap,
    SimulationSpec,
    SweepPoint,
    SweepResult,
    make_geometry,
)
from relayfield.services import analytic, montecarlo

logger = logging.getLogger("relayfield.search")

LOG_WC_BOUNDS = (-8.0, 4.0)
WC_GRID_POINTS = 64
WC_REL_WIDTH = 1e-3

T_BRACKET = (1e-6, 1e6)
T_REL_WIDTH = 1e-4
T_GRID_POINTS = 25

TIE_TOL = 1e-12
PRECEDENCE = (Protocol.df, Protocol.cf, Protocol.direct)


class WcOptimum(NamedTuple):
    w_c: float
    bound: float
    method: str


def optimize_wc(
    network: NetworkModel,
    geometry: LinkGeometry,
    params: ProtocolParams,
    quad: QuadratureSpec | None = None,
    *,
    tight: bool = False,
) -> WcOptimum:
    """Minimize the CF upper bound over log10(W_c) in [-8, 4].

    Bounded Brent (golden-section steps with parabolic refinement) to a relative
    W_c width of 1e-3. The bound is only empirically unimodal: if either bracket
    end beats the interior minimum, a 64-point log grid decides instead.
    """
    lo, hi = LOG_WC_BOUNDS
    if network.lam == 0:
        mid = 0.5 * (lo + hi)
        logger.info("optimize_wc: lambda = 0, every W_c gives 0; using 10^%g", mid)
        return WcOptimum(w_c=10.0**mid, bound=0.0, method="tie")

    seen: dict[float, float] = {}

    def bound(log_wc: float) -> float:
        if log_wc not in seen:
            trial = params.replace(w_c=10.0**log_wc)
            seen[log_wc] = analytic.cf_outage_upper(
                network, geometry, trial, quad, tight=tight
            ).value
        return seen[log_wc]

    result = optimize.minimize_scalar(
        bound,
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": math.log10(1.0 + WC_REL_WIDTH)},
    )
    best_x, best = float(result.x), bound(float(result.x))
    if min(bound(lo), bound(hi)) < best:
        logger.warning(
            "optimize_wc: bracket end beats the interior minimum (%.6g); scanning a grid", best
        )
        grid = np.linspace(lo, hi, WC_GRID_POINTS)
        values = [bound(float(x)) for x in grid]
        idx = int(np.argmin(values))
        best_x, best, method = float(grid[idx]), values[idx], "grid"
    else:
        method = "golden"

    logger.info(
        "optimize_wc lam=%g k=%g T=%g: W_c=%.6g bound=%.10g (%s, %d evaluations)",
        network.lam,
        geometry.k,
        params.threshold,
        10.0**best_x,
        best,
        method,
        len(seen),
    )
    return WcOptimum(w_c=10.0**best_x, bound=best, method=method)


def protocol_outage(
    protocol: Protocol,
    network: NetworkModel,
    geometry: LinkGeometry,
    params: ProtocolParams,
    quad: QuadratureSpec | None = None,
) -> float:
    """The outage figure each protocol is ranked by: DF exact at rho = 0, CF upper
    bound at its optimized W_c, direct exact, cut-set lower bound."""
    match protocol:
        case Protocol.df:
            return analytic.df_outage(network, geometry, params.replace(rho_mag=0.0), quad).value
        case Protocol.cf:
            return optimize_wc(network, geometry, params, quad).bound
        case Protocol.direct:
            return analytic.direct_outage(network, geometry.distance, params.threshold).value
        case Protocol.cutset:
            return analytic.cutset_outage_lower(network, geometry, params, quad).value
    raise DomainError(f"unknown protocol {protocol!r}")


def bisect_threshold(outage: Callable[[float], float], target: float) -> float:
    """Largest T in the bracket with outage(T) <= target, to relative width 1e-4.

    Bounds need not be monotone in T near 0 (the CF second-event term grows like
    (1 + T) / T), so a descending log-grid scan first finds the highest grid point
    meeting the target; bisection then runs between it and the grid point above.
    """
    grid = [float(t) for t in np.geomspace(*T_BRACKET, T_GRID_POINTS)]
    hi = grid[-1]
    if outage(hi) <= target:
        raise BracketExhaustedError(
            f"outage stays at or below {target:g} up to T = {hi:g}; target unreachable"
        )
    for lo in reversed(grid[:-1]):
        if outage(lo) <= target:
            break
        hi = lo
    else:
        return 0.0
    while hi / lo - 1.0 > T_REL_WIDTH:
        mid = math.sqrt(lo * hi)
        if outage(mid) <= target:
            lo = mid
        else:
            hi = mid
    return lo


def max_rate(
    protocol: Protocol,
    target: float,
    network: NetworkModel,
    geometry: LinkGeometry,
    quad: QuadratureSpec | None = None,
    params: ProtocolParams | None = None,
) -> float:
    """T_max: the largest SIR threshold whose outage stays at ``target``.

    ``params`` supplies the CF partition count and cut-set settings; its threshold
    is ignored. CF also counts the W_c -> inf end, where the relay is unused and
    its upper bound equals the direct outage.
    """
    if not 0 < target < 1:
        raise DomainError(f"target outage must lie in (0, 1), got {target}")
    base = params or ProtocolParams()

    def outage(t: float) -> float:
        trial = base.replace(threshold=t)
        if protocol is Protocol.cf:
            direct = analytic.direct_outage(network, geometry.distance, t).value
            # only the comparison with target matters, so skip the W_c search
            if direct <= target:
                return direct
            return min(direct, protocol_outage(protocol, network, geometry, trial, quad))
        return protocol_outage(protocol, network, geometry, trial, quad)

    t_max = bisect_threshold(outage, target)
    logger.info(
        "max_rate %s lam=%g k=%g p=%g: T_max=%.6g",
        protocol.value,
        network.lam,
        geometry.k,
        target,
        t_max,
    )
    return t_max


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def _sweep_point(
    lam: float,
    protocols: Sequence[Protocol],
    network: NetworkModel,
    geometry: LinkGeometry,
    params: ProtocolParams,
    quad: QuadratureSpec | None,
    tune_wc: bool,
    tight: bool,
    simulation: SimulationSpec | None,
) -> SweepPoint:
    net = network.with_density(lam)
    df_params = params.replace(rho_mag=0.0)
    estimates: list[OutageEstimate] = []
    w_c, wc_method, rho_cut = None, None, None

    for protocol in protocols:
        if protocol is Protocol.df:
            estimates.append(analytic.df_outage(net, geometry, df_params, quad))
        elif protocol is Protocol.cf:
            if tune_wc:
                opt = optimize_wc(net, geometry, params, quad, tight=tight)
                w_c, wc_method = opt.w_c, opt.method
            else:
                w_c, wc_method = params.w_c, "fixed"
            cf_params = params.replace(w_c=w_c)
            upper = analytic.cf_outage_upper(net, geometry, cf_params, quad, tight=tight)
            upper.metadata["wc_method"] = wc_method
            estimates.append(upper)
            estimates.append(analytic.cf_outage_lower(net, geometry, cf_params, quad))
        elif protocol is Protocol.direct:
            estimates.append(analytic.direct_outage(net, geometry.distance, params.threshold))
        elif protocol is Protocol.cutset:
            cut = analytic.cutset_outage_lower(net, geometry, params, quad)
            rho_cut = cut.metadata["rho_star"]
            estimates.append(cut)

    if simulation is not None:
        for protocol in protocols:
            mc_params = params
            if protocol is Protocol.df:
                mc_params = df_params
            elif protocol is Protocol.cf and w_c is not None:
                mc_params = params.replace(w_c=w_c)
            elif protocol is Protocol.cutset and rho_cut is not None:
                mc_params = params.replace(rho_mag=rho_cut)
            estimates.append(
                montecarlo.estimate_outage(protocol, net, geometry, mc_params, simulation)
            )

    logger.info("sweep point lambda=%g done (%d estimates)", lam, len(estimates))
    return SweepPoint(
        value=lam,
        estimates=estimates,
        w_c=w_c,
        rho_df=0.0,
        rho_cutset=rho_cut,
        wc_method=wc_method,
    )


def sweep_lambda(
    protocols: Sequence[Protocol],
    lambdas: Sequence[float],
    network: NetworkModel,
    geometry: LinkGeometry,
    params: ProtocolParams,
    quad: QuadratureSpec | None = None,
    *,
    threads: int = 1,
    tune_wc: bool = True,
    tight: bool = False,
    simulation: SimulationSpec | None = None,
) -> SweepResult:
    grid = [float(x) for x in lambdas]
    if not grid:
        raise DomainError("empty lambda grid")
    if any(b <= a for a, b in zip(grid, grid[1:], strict=False)):
        raise DomainError("lambda grid must be strictly increasing")
    if any(x < 0 for x in grid):
        raise DomainError("densities must be >= 0")

    points = Parallel(n_jobs=threads)(
        delayed(_sweep_point)(
            lam, tuple(protocols), network, geometry, params, quad, tune_wc, tight, simulation
        )
        for lam in grid
    )
    return SweepResult(axis="lambda", grid=grid, points=list(points))


# ---------------------------------------------------------------------------
# Protocol-preference regions
# ---------------------------------------------------------------------------


def polar_position(x: float, y: float, distance: float) -> tuple[float, float]:
    """(k, theta) of the relay at (x, y), with theta folded into [0, 2 pi)."""
    theta = math.atan2(y, x) % TAU
    if theta >= TAU:
        theta = 0.0
    return math.hypot(x, y) / distance, theta


def pick_winner(outages: dict[Protocol, float], tol: float = TIE_TOL) -> Protocol:
    best = min(outages.values())
    for protocol in PRECEDENCE:
        if protocol in outages and outages[protocol] <= best + tol:
            return protocol
    raise DomainError("no protocol to rank")


def _region_cell(
    x: float,
    y: float,
    network: NetworkModel,
    params: ProtocolParams,
    distance: float,
    p_direct: float,
    quad: QuadratureSpec | None,
) -> RegionCell:
    k, theta = polar_position(x, y, distance)
    try:
        geometry = make_geometry(distance, k, theta, network.alpha)
    except DegenerateGeometryError:
        logger.debug("region cell (%g, %g) sits on a terminal; marked invalid", x, y)
        return RegionCell(x=x, y=y, k=k, theta=theta)

    p_df = analytic.df_outage(network, geometry, params.replace(rho_mag=0.0), quad).value
    opt = optimize_wc(network, geometry, params, quad)
    outages = {Protocol.df: p_df, Protocol.cf: opt.bound, Protocol.direct: p_direct}
    return RegionCell(
        x=x,
        y=y,
        k=k,
        theta=theta,
        winner=pick_winner(outages),
        p_df=p_df,
        p_cf_upper=opt.bound,
        p_direct=p_direct,
        w_c=opt.w_c,
    )


def region_map(
    network: NetworkModel,
    xs: Sequence[float],
    ys: Sequence[float],
    params: ProtocolParams,
    quad: QuadratureSpec | None = None,
    *,
    distance: float = 10.0,
    threads: int = 1,
) -> RegionMap:
    """Winning protocol at every relay position of the Cartesian grid xs x ys.

    Cells on the source or destination are kept but carry no winner.
    """
    p_direct = analytic.direct_outage(network, distance, params.threshold).value
    cells = Parallel(n_jobs=threads)(
        delayed(_region_cell)(float(x), float(y), network, params, distance, p_direct, quad)
        for y in ys
        for x in xs
    )
    result = RegionMap(
        xs=[float(x) for x in xs],
        ys=[float(y) for y in ys],
        cells=list(cells),
        precedence=list(PRECEDENCE),
        metadata={
            "lambda": network.lam,
            "alpha": network.alpha,
            "distance": distance,
            "threshold": params.threshold,
            "partitions": params.partitions,
            "p_direct": p_direct,
            "cf_entry": EstimateKind.upper.value,
            "tie_tolerance": TIE_TOL,
        },
    )
    result.metadata["counts"] = result.counts()
    logger.info("region map done: %s", result.metadata["counts"])
    return result


def check_dominance(region: RegionMap, tol: float = TIE_TOL) -> list[RegionCell]:
    """Cells whose recorded winner is beaten by a rival by more than ``tol``."""
    bad = []
    for cell in region.cells:
        if not cell.valid:
            continue
        outages = cell.outages()
        if any(outages[cell.winner] > v + tol for v in outages.values()):
            bad.append(cell)
    return bad

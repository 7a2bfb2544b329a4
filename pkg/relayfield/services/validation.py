"""Analytic-vs-simulation acceptance checks run by ``relayfield validate``.

Point checks run at the configured scenario. Concordance, ordering and refinement
run at every (lambda, k) of the acceptance grid. With ``acceptance_trends`` on, the
grid values also feed the trend, max-rate and region checks.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Iterable, Sequence

import numpy as np

from relayfield.config import ScenarioConfig
from relayfield.models import (
    JointTransformArgs,
    OutageEstimate,
    Protocol,
    RateRow,
    RegionCell,
    RegionMap,
    ValidationCheck,
    ValidationReport,
)
from relayfield.services import analytic, interference, montecarlo, report, search

logger = logging.getLogger("relayfield.validation")

SIGMAS = 3.0
TRANSFORM_REL_TOL = 1e-5
EPS = 1e-9

DF_CUTSET_RATIO = 1.5
CF_GAP_LAMBDA = 1e-4
CF_GAP_REL = 0.10
CF_DIRECT_REL = 0.10
RATE_REL_TOL = 1e-3
CROSSOVER_KS = (0.2, 0.95)
REGION_LAMBDA = 1e-4
# (k, theta, expected winner)
REGION_SPOTS = (
    (0.05, 0.0, Protocol.df),
    (0.98, 0.0, Protocol.cf),
    (10.0, math.pi, Protocol.direct),
)

# (lambda, k) -> {"df", "cf_upper", "cf_lower", "direct", "cutset"}
GridValues = dict[tuple[float, float], dict[str, float]]


def concordant(mc: OutageEstimate, exact: float, sigmas: float = SIGMAS) -> bool:
    """|mc - exact| within ``sigmas`` standard errors.

    The error is floored at the binomial error implied by the exact value, so a
    run that happens to see no events is not judged with a zero error bar.
    """
    trials = mc.metadata.get("trials", 1)
    floor = math.sqrt(max(exact * (1.0 - exact), 0.0) / trials)
    return abs(mc.value - exact) <= sigmas * max(mc.stderr or 0.0, floor) + 1e-12


def _check(name: str, passed: bool, detail: str) -> ValidationCheck:
    return ValidationCheck(name=name, passed=bool(passed), detail=detail)


def _tag(lam: float, k: float) -> str:
    return f"[lambda={lam:g},k={k:g}]"


class _Suite:
    def __init__(self) -> None:
        self.report = ValidationReport()

    def record(self, name: str, passed: bool, detail: str) -> None:
        self.extend([_check(name, passed, detail)])

    def extend(self, checks: Iterable[ValidationCheck]) -> None:
        for check in checks:
            level = logging.INFO if check.passed else logging.WARNING
            logger.log(
                level, "%s: %s (%s)", check.name, "pass" if check.passed else "FAIL", check.detail
            )
            self.report.checks.append(check)


# ---------------------------------------------------------------------------
# Checks at the configured point
# ---------------------------------------------------------------------------


def _check_constant(suite: _Suite) -> None:
    c4 = interference.constant_C(4.0)
    c3 = interference.constant_C(3.0)
    ref4 = math.pi**2 / 2.0
    ref3 = 4.0 * math.pi**2 / (3.0 * math.sqrt(3.0))
    suite.record(
        "constant_C",
        abs(c4 - ref4) <= 1e-9 and abs(c3 - ref3) <= 1e-9,
        f"C(4)={c4:.12g} vs {ref4:.12g}, C(3)={c3:.12g} vs {ref3:.12g}",
    )


def _check_transforms(suite: _Suite, config: ScenarioConfig) -> None:
    network, geometry, quad = config.network(), config.geometry(), config.quad()
    if network.lam == 0:
        suite.record("transform_identity", True, "lambda = 0, every transform is 1")
        return
    t = config.threshold
    worst, sandwich_ok = 0.0, True
    for s1, s2 in itertools.product((0.1, 1.0, 10.0), repeat=2):
        args = JointTransformArgs(
            omega1=s1 * t / geometry.l_sd,
            omega2=s2 * t / geometry.l_sr,
            geometry=geometry,
            network=network,
        )
        joint = interference.laplace_joint(args, quad)
        oracle = interference.pgfl_joint_oracle(args, quad)
        worst = max(worst, abs(joint - oracle) / oracle if oracle > 0 else abs(joint))
        m1 = interference.laplace_marginal(args.omega1, network)
        m2 = interference.laplace_marginal(args.omega2, network)
        slack = 10.0 * quad.rel_tol
        sandwich_ok &= m1 * m2 * (1 - slack) <= joint <= min(m1, m2) * (1 + slack)
    suite.record(
        "transform_identity",
        worst <= TRANSFORM_REL_TOL and sandwich_ok,
        f"max relative gap to the PGFL oracle {worst:.3g}, "
        f"sandwich {'ok' if sandwich_ok else 'broken'}",
    )


def _check_field(suite: _Suite, config: ScenarioConfig) -> None:
    network, geometry, spec = config.network(), config.geometry(), config.simulation()
    if network.lam == 0:
        suite.record("field_sampling", True, "lambda = 0, empty field")
        return
    radius, _ = montecarlo.window_radius(network, geometry, spec)
    counts = np.array(
        [
            montecarlo.sample_scene(network, geometry, spec, i)[2].node_count
            for i in range(min(spec.trials, 2000))
        ]
    )
    expected = network.lam * math.pi * radius**2
    se = math.sqrt(expected / counts.size)
    count_ok = abs(counts.mean() - expected) <= SIGMAS * se

    omega = config.threshold / geometry.l_sd
    mean, stderr = montecarlo.estimate_transform(
        omega, 0.0, network, geometry, spec.model_copy(update={"trials": min(spec.trials, 20000)})
    )
    exact = interference.laplace_marginal(omega, network)
    transform_ok = abs(mean - exact) <= SIGMAS * max(stderr, 1e-12)
    suite.record(
        "field_sampling",
        count_ok and transform_ok,
        f"mean nodes {counts.mean():.6g} vs {expected:.6g}; "
        f"E[exp(-w I_d)] {mean:.6g} +- {stderr:.2g} vs {exact:.6g}",
    )


def _check_window(suite: _Suite, config: ScenarioConfig) -> None:
    network, geometry, spec = config.network(), config.geometry(), config.simulation()
    if network.lam == 0:
        suite.record("window", True, "lambda = 0, no window needed")
        return
    radius, capped = montecarlo.window_radius(network, geometry, spec)
    share = montecarlo.tail_share(network, 0.5 * radius)
    suite.record(
        "window",
        not capped and share <= spec.tail_fraction * (1.0 + EPS),
        f"radius {radius:.6g}{' (capped)' if capped else ''}, "
        f"tail share {share:.3g} vs {spec.tail_fraction:g}",
    )


def _check_rho(suite: _Suite, config: ScenarioConfig) -> None:
    network, geometry, params, quad = (
        config.network(),
        config.geometry(),
        config.params(),
        config.quad(),
    )
    scan = analytic.df_rho_scan(network, geometry, params, quad)
    values = [v for _, v in scan]
    monotone = all(b >= a - EPS for a, b in itertools.pairwise(values))
    best = analytic.df_optimal_rho(network, geometry, params, quad)
    suite.record(
        "df_rho_monotone",
        monotone and best == 0.0,
        f"P_out from {values[0]:.6g} to {values[-1]:.6g}, argmin |rho| = {best:g}",
    )


def _check_threshold_monotone(suite: _Suite, config: ScenarioConfig) -> None:
    # The optimized CF upper bound is left out: its second-event term falls with T.
    network, geometry, params, quad = (
        config.network(),
        config.geometry(),
        config.params(),
        config.quad(),
    )
    low, high = params, params.replace(threshold=2.0 * params.threshold)
    pairs = {
        "df": [analytic.df_outage(network, geometry, p, quad).value for p in (low, high)],
        "direct": [
            analytic.direct_outage(network, geometry.distance, p.threshold).value
            for p in (low, high)
        ],
        "cutset": [
            analytic.cutset_outage_lower(network, geometry, p, quad).value for p in (low, high)
        ],
    }
    ok = all(b >= a - EPS for a, b in pairs.values())
    detail = ", ".join(f"{name} {a:.6g}->{b:.6g}" for name, (a, b) in pairs.items())
    suite.record("threshold_monotone", ok, f"T={low.threshold:g}->{high.threshold:g}: {detail}")


def _check_inversion(suite: _Suite, config: ScenarioConfig) -> None:
    network, geometry = config.network(), config.geometry()
    if network.lam == 0:
        suite.record("direct_inversion", True, "lambda = 0, no finite T_max")
        return
    p = analytic.direct_outage(network, geometry.distance, config.threshold).value
    closed = analytic.direct_max_threshold(network, geometry.distance, p)
    solved = search.max_rate(Protocol.direct, p, network, geometry, config.quad())
    ok = (
        abs(closed - config.threshold) <= 1e-9 * config.threshold
        and abs(solved - config.threshold) <= 1e-3 * config.threshold
    )
    suite.record(
        "direct_inversion",
        ok,
        f"T={config.threshold:g}: closed form {closed:.10g}, bisection {solved:.10g}",
    )


# ---------------------------------------------------------------------------
# Checks at every acceptance grid point
# ---------------------------------------------------------------------------


def _grid_point(suite: _Suite, config: ScenarioConfig, tag: str) -> dict[str, float]:
    network, geometry, params, quad = (
        config.network(),
        config.geometry(),
        config.params(),
        config.quad(),
    )
    spec = config.simulation()

    direct = analytic.direct_outage(network, geometry.distance, params.threshold).value
    mc = montecarlo.estimate_outage(Protocol.direct, network, geometry, params, spec)
    suite.record(
        f"direct_mc{tag}",
        concordant(mc, direct),
        f"exact {direct:.6g}, mc {mc.value:.6g}+-{mc.stderr:.2g}",
    )

    df = analytic.df_outage(network, geometry, params, quad).value
    mc = montecarlo.estimate_outage(Protocol.df, network, geometry, params, spec)
    suite.record(
        f"df_mc{tag}", concordant(mc, df), f"exact {df:.6g}, mc {mc.value:.6g}+-{mc.stderr:.2g}"
    )

    opt = search.optimize_wc(network, geometry, params, quad)
    cf_params = params.replace(w_c=opt.w_c)
    upper = analytic.cf_outage_upper(network, geometry, cf_params, quad).value
    lower = analytic.cf_outage_lower(network, geometry, cf_params, quad).value
    mc = montecarlo.estimate_outage(Protocol.cf, network, geometry, cf_params, spec)
    band = SIGMAS * max(mc.stderr, math.sqrt(max(upper * (1 - upper), 0.0) / spec.trials))
    suite.record(
        f"cf_union_mc{tag}",
        lower - band <= mc.value <= upper + band,
        f"bounds [{lower:.6g}, {upper:.6g}], mc {mc.value:.6g}+-{mc.stderr:.2g} "
        f"at W_c={opt.w_c:.4g}",
    )

    cut = analytic.cutset_outage_lower(network, geometry, params, quad)
    mc = montecarlo.estimate_outage(
        Protocol.cutset, network, geometry, params.replace(rho_mag=cut.metadata["rho_star"]), spec
    )
    suite.record(
        f"cutset_mc{tag}",
        mc.value + SIGMAS * mc.stderr >= cut.value - 1e-12,
        f"lower bound {cut.value:.6g}, mc {mc.value:.6g}+-{mc.stderr:.2g}",
    )

    values = {
        "df": df,
        "cf_upper": upper,
        "cf_lower": lower,
        "direct": direct,
        "cutset": cut.value,
    }
    ok = (
        values["cutset"] <= values["df"] + EPS
        and values["cutset"] <= values["cf_upper"] + EPS
        and values["cf_lower"] <= values["cf_upper"] + EPS
    )
    suite.record(f"ordering{tag}", ok, ", ".join(f"{k}={v:.6g}" for k, v in values.items()))
    _check_refinement(suite, config, tag)
    return values


def _check_refinement(suite: _Suite, config: ScenarioConfig, tag: str) -> None:
    network, geometry, params, quad = (
        config.network(),
        config.geometry(),
        config.params(),
        config.quad(),
    )
    name = f"cf_refinement{tag}"
    if network.lam == 0 or params.partitions <= 4:
        suite.record(name, True, "skipped (lambda = 0 or N <= 4)")
        return

    def gap(n: int) -> float:
        p = params.replace(partitions=n)
        return analytic.cf_event_a_upper(network, geometry, p, quad) - analytic.cf_event_a_lower(
            network, geometry, p, quad
        )

    coarse, fine = gap(4), gap(params.partitions)
    suite.record(name, fine < coarse, f"gap N=4 {coarse:.6g}, N={params.partitions} {fine:.6g}")


def lambda_monotone_checks(values: GridValues) -> list[ValidationCheck]:
    """Each outage figure nondecreasing along lambda at every k.

    The CF lower bound is left out: it is taken at a W_c tuned for the upper bound.
    """
    checks = []
    for k in sorted({k for _, k in values}):
        lams = sorted(lam for lam, kk in values if kk == k)
        broken = [
            name
            for name in ("df", "cf_upper", "direct", "cutset")
            if any(
                values[(b, k)][name] < values[(a, k)][name] - EPS
                for a, b in itertools.pairwise(lams)
            )
        ]
        checks.append(
            _check(
                f"lambda_monotone[k={k:g}]",
                not broken,
                f"decreasing: {', '.join(broken)}" if broken else f"{len(lams)} densities",
            )
        )
    return checks


# ---------------------------------------------------------------------------
# Trends, max-rate ordering and regions
# ---------------------------------------------------------------------------


def sweep_trend_checks(values: GridValues) -> list[ValidationCheck]:
    """Trend checks over the grid: the relay nearest the source and the one nearest
    the destination."""
    lams = sorted({lam for lam, _ in values if lam > 0})
    ks = sorted({k for _, k in values})
    if not lams:
        return [_check("sweep_trends", True, "skipped (no positive density)")]
    near, far = ks[0], ks[-1]
    sparse, dense = lams[0], lams[-1]
    checks = []

    rows = [values[(lam, near)] for lam in lams]
    checks.append(
        _check(
            f"df_below_direct[k={near:g}]",
            all(r["df"] < r["direct"] for r in rows),
            ", ".join(f"{r['df']:.4g}<{r['direct']:.4g}" for r in rows),
        )
    )

    v = values[(sparse, near)]
    checks.append(
        _check(
            f"df_near_cutset[lambda={sparse:g},k={near:g}]",
            v["df"] <= DF_CUTSET_RATIO * v["cutset"],
            f"df {v['df']:.6g}, cut-set {v['cutset']:.6g}, limit x{DF_CUTSET_RATIO:g}",
        )
    )

    gaps = {
        lam: (values[(lam, near)]["cf_upper"] - values[(lam, near)]["cf_lower"])
        / values[(lam, near)]["cf_upper"]
        for lam in lams
        if lam <= CF_GAP_LAMBDA and values[(lam, near)]["cf_upper"] > 0
    }
    checks.append(
        _check(
            f"cf_bounds_close[k={near:g}]",
            all(g < CF_GAP_REL for g in gaps.values()),
            ", ".join(f"lambda={lam:g}: {g:.3g}" for lam, g in gaps.items()) or "no points",
        )
    )

    v = values[(dense, near)]
    rel = abs(v["cf_upper"] - v["direct"]) / v["direct"] if v["direct"] > 0 else math.inf
    checks.append(
        _check(
            f"cf_near_direct[lambda={dense:g},k={near:g}]",
            rel <= CF_DIRECT_REL,
            f"cf upper {v['cf_upper']:.6g}, direct {v['direct']:.6g}, gap {rel:.3g}",
        )
    )

    v = values[(sparse, far)]
    checks.append(
        _check(
            f"cf_below_df[lambda={sparse:g},k={far:g}]",
            v["cf_upper"] < v["df"],
            f"cf upper {v['cf_upper']:.6g}, df {v['df']:.6g}",
        )
    )
    return checks


def rate_checks(
    rows: Sequence[RateRow],
    ordering_ks: Iterable[float] | None = None,
    tol: float = RATE_REL_TOL,
) -> list[ValidationCheck]:
    """cut-set >= max(DF, CF) >= min(DF, CF) >= direct at every k of ``ordering_ks``
    (all rows when None), plus the DF/CF crossover between the near-source and
    near-destination relays."""
    table: dict[float, dict[Protocol, float]] = {}
    for row in rows:
        table.setdefault(row.k, {})[row.protocol] = row.t_max

    ordered = set(table) if ordering_ks is None else set(ordering_ks) & set(table)
    broken = []
    for k in sorted(ordered):
        t = table[k]
        hi, lo = max(t[Protocol.df], t[Protocol.cf]), min(t[Protocol.df], t[Protocol.cf])
        if not (t[Protocol.cutset] >= hi * (1 - tol) and lo >= t[Protocol.direct] * (1 - tol)):
            broken.append(k)
    checks = [
        _check(
            "rate_ordering",
            not broken,
            f"broken at k={broken}" if broken else f"{len(ordered)} relay positions",
        )
    ]

    near, far = CROSSOVER_KS
    if near in table and far in table:
        ok = (
            table[near][Protocol.df] > table[near][Protocol.cf]
            and table[far][Protocol.cf] > table[far][Protocol.df]
        )
        checks.append(
            _check(
                "rate_crossover",
                ok,
                f"k={near:g}: df {table[near][Protocol.df]:.6g} cf {table[near][Protocol.cf]:.6g}; "
                f"k={far:g}: df {table[far][Protocol.df]:.6g} cf {table[far][Protocol.cf]:.6g}",
            )
        )
    return checks


def region_checks(
    spots: Sequence[tuple[RegionCell, Protocol]], region: RegionMap
) -> list[ValidationCheck]:
    checks = [
        _check(
            f"region_spot[x={cell.x:g},y={cell.y:.3g}]",
            cell.winner is expected,
            f"winner {cell.winner.value if cell.winner else 'invalid'}, expected {expected.value}",
        )
        for cell, expected in spots
    ]
    counts = region.counts()
    violations = search.check_dominance(region)
    checks.append(
        _check(
            "region_df_larger",
            counts[Protocol.df.value] > counts[Protocol.cf.value] and not violations,
            f"counts {counts}, dominance violations {len(violations)}",
        )
    )
    return checks


def _check_rates(suite: _Suite, config: ScenarioConfig, lam: float) -> None:
    ks = sorted({*config.rate_ks, *CROSSOVER_KS})
    rate_config = config.model_copy(update={"lam": lam, "rate_ks": ks})
    suite.extend(rate_checks(report.rate_table(rate_config, list(Protocol)), config.rate_ks))


def _check_region(suite: _Suite, config: ScenarioConfig) -> None:
    network = config.network().with_density(REGION_LAMBDA)
    params, quad, d = config.params(), config.quad(), config.distance
    spots = []
    for k, theta, expected in REGION_SPOTS:
        x, y = k * d * math.cos(theta), k * d * math.sin(theta)
        cell = search.region_map(network, [x], [y], params, quad, distance=d).cells[0]
        spots.append((cell, expected))
    region = search.region_map(
        network,
        report.grid_values(config.region_x),
        report.grid_values(config.region_y),
        params,
        quad,
        distance=d,
        threads=config.threads,
    )
    suite.extend(region_checks(spots, region))


def run_validation(config: ScenarioConfig) -> ValidationReport:
    suite = _Suite()
    _check_constant(suite)
    _check_transforms(suite, config)
    _check_field(suite, config)
    _check_window(suite, config)
    _check_rho(suite, config)
    _check_threshold_monotone(suite, config)
    _check_inversion(suite, config)

    values: GridValues = {}
    for lam, k in itertools.product(config.acceptance_lambdas, config.acceptance_ks):
        point = config.model_copy(update={"lam": lam, "k": k})
        values[(lam, k)] = _grid_point(suite, point, _tag(lam, k))
    suite.extend(lambda_monotone_checks(values))

    if config.acceptance_trends:
        suite.extend(sweep_trend_checks(values))
        positive = [lam for lam in config.acceptance_lambdas if lam > 0]
        if positive:
            _check_rates(suite, config, positive[0])
            _check_region(suite, config)

    failed = suite.report.failures()
    logger.info("validation: %d checks, %d failed", len(suite.report.checks), len(failed))
    return suite.report

"""Monte Carlo ground truth: sample the marked field and the tagged fades, count outages.

Every trial draws from its own Philox stream keyed by the run seed with the trial
index in the top counter word, so results do not depend on how trials are chunked
or scheduled.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from joblib import Parallel, delayed

from relayfield.errors import DomainError
from relayfield.models import (
    EstimateKind,
    FadingSample,
    LinkGeometry,
    NetworkModel,
    OutageEstimate,
    Protocol,
    ProtocolParams,
    SimulationSpec,
)
from relayfield.services.interference import constant_C

logger = logging.getLogger("relayfield.montecarlo")

MIN_EVENTS = 10

# Columns of the per-trial indicator matrix.
_DIRECT, _DF, _CF, _CUT_FIRST, _CUT_SECOND = range(5)
_COLUMNS = 5


def trial_generator(seed: int, trial_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=trial_index << 192))


def tail_share(network: NetworkModel, reach: float) -> float:
    """Mean interference from nodes beyond ``reach``, relative to (lam C) ** (alpha / 2)."""
    if network.lam == 0:
        return 0.0
    alpha = network.alpha
    scale = (network.lam * constant_C(alpha)) ** (alpha / 2.0)
    return 2.0 * math.pi * network.lam * reach ** (2.0 - alpha) / ((alpha - 2.0) * scale)


def window_radius(
    network: NetworkModel, geometry: LinkGeometry, spec: SimulationSpec
) -> tuple[float, bool]:
    """Simulation disk radius about the s-d midpoint, and whether the cap was hit.

    The disk must hold the relay in its inner half and leave out at most
    ``tail_fraction`` of the field's interference scale (lam C) ** (alpha / 2).
    """
    if network.lam == 0:
        return 0.0, False
    needed = (tail_share(network, 1.0) / spec.tail_fraction) ** (1.0 / (network.alpha - 2.0))
    cx = 0.5 * geometry.distance
    rx, ry = geometry.relay
    radius = 2.0 * max(needed, math.hypot(rx - cx, ry), cx) * spec.window_scale
    if radius > spec.max_window_radius:
        return spec.max_window_radius, True
    return radius, False


def _draw_scene(
    network: NetworkModel,
    geometry: LinkGeometry,
    spec: SimulationSpec,
    radius: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    # Draw order is fixed: tagged uniforms, node count, positions, marks.
    u = rng.random(3)
    v = rng.random(3)
    count = int(rng.poisson(network.lam * math.pi * radius * radius)) if network.lam > 0 else 0
    r = radius * np.sqrt(rng.random(count))
    phi = 2.0 * math.pi * rng.random(count)
    positions = np.column_stack((0.5 * geometry.distance + r * np.cos(phi), r * np.sin(phi)))
    marks = rng.exponential(spec.fading_scale, size=(2, count))
    return u, v, positions, marks[0], marks[1]


def _amplitudes(u: np.ndarray, v: np.ndarray, scale: float) -> np.ndarray:
    # Circularly-symmetric complex Gaussian with E|h|^2 = scale: |h|^2 = -scale ln(1 - u).
    return np.sqrt(-scale * np.log1p(-u)) * np.exp(2j * math.pi * v)


def _interference(
    positions: np.ndarray, marks: np.ndarray, point: tuple[float, float], alpha: float
) -> float:
    if marks.size == 0:
        return 0.0
    dist2 = (positions[:, 0] - point[0]) ** 2 + (positions[:, 1] - point[1]) ** 2
    return float(np.sum(marks * dist2 ** (-0.5 * alpha)))


def sample_scene(
    network: NetworkModel,
    geometry: LinkGeometry,
    spec: SimulationSpec,
    trial_index: int,
) -> tuple[float, float, FadingSample]:
    """(I_d, I_r, fades) of one trial; replaying (seed, trial_index) is bit-identical."""
    radius, _ = window_radius(network, geometry, spec)
    rng = trial_generator(spec.seed, trial_index)
    u, v, positions, marks_d, marks_r = _draw_scene(network, geometry, spec, radius, rng)
    h = _amplitudes(u, v, spec.fading_scale)
    i_d = _interference(positions, marks_d, geometry.destination, network.alpha)
    i_r = _interference(positions, marks_r, geometry.relay, network.alpha)
    sample = FadingSample(
        h_sr=complex(h[0]),
        h_sd=complex(h[1]),
        h_rd=complex(h[2]),
        positions=positions,
        marks_d=marks_d,
        marks_r=marks_r,
    )
    return i_d, i_r, sample


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    # x / 0 is +inf for x > 0; a zero numerator over a zero denominator never occurs
    # for continuous fades, and is treated as +inf too.
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    return np.where(den > 0, out, np.inf)


def outage_indicators(
    i_d: np.ndarray,
    i_r: np.ndarray,
    h: np.ndarray,
    geometry: LinkGeometry,
    params: ProtocolParams,
) -> np.ndarray:
    """Per-trial 0/1 outage indicators, one column per event.

    ``h`` has shape (n, 3) holding the complex amplitudes (sr, sd, rd).
    """
    t = params.threshold
    rho = params.rho_mag
    l_sd, l_sr, l_rd = geometry.l_sd, geometry.l_sr, geometry.l_rd
    h_sr, h_sd, h_rd = h[:, 0], h[:, 1], h[:, 2]
    p_sr, p_sd, p_rd = np.abs(h_sr) ** 2, np.abs(h_sd) ** 2, np.abs(h_rd) ** 2

    direct = p_sd * l_sd < t * i_d
    combined = (
        l_sd * p_sd
        + l_rd * p_rd
        + 2.0 * math.sqrt(l_sd * l_rd) * np.real(rho * h_sd * np.conj(h_rd))
    )
    dest_cut = combined < t * i_d
    df = (p_sr * l_sr * (1.0 - rho * rho) < t * i_r) | dest_cut

    sir_r = _ratio(p_sr * l_sr, i_r + params.w_c)
    sir_d = _ratio(p_sd * l_sd, i_d)
    cf_a = sir_r + sir_d < t
    cf_b = params.w_c * l_rd * p_rd < i_d * l_sr * p_sr + i_r * l_sd * p_sd + i_r * i_d
    cf = cf_a | cf_b

    cut_first = (1.0 - rho * rho) * (_ratio(p_sr * l_sr, i_r) + sir_d) < t

    out = np.empty((i_d.shape[0], _COLUMNS))
    out[:, _DIRECT] = direct
    out[:, _DF] = df
    out[:, _CF] = cf
    out[:, _CUT_FIRST] = cut_first
    out[:, _CUT_SECOND] = dest_cut
    return out


def _simulate_chunk(
    network: NetworkModel,
    geometry: LinkGeometry,
    params: ProtocolParams,
    spec: SimulationSpec,
    radius: float,
    start: int,
    stop: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Column sums and sums of squares of the per-trial outage values."""
    n = stop - start
    i_d = np.empty(n)
    i_r = np.empty(n)
    h = np.empty((n, 3), dtype=complex)
    h_anti = np.empty((n, 3), dtype=complex)
    for j, trial in enumerate(range(start, stop)):
        rng = trial_generator(spec.seed, trial)
        u, v, positions, marks_d, marks_r = _draw_scene(network, geometry, spec, radius, rng)
        h[j] = _amplitudes(u, v, spec.fading_scale)
        if spec.antithetic:
            h_anti[j] = _amplitudes(1.0 - u, (v + 0.5) % 1.0, spec.fading_scale)
        i_d[j] = _interference(positions, marks_d, geometry.destination, network.alpha)
        i_r[j] = _interference(positions, marks_r, geometry.relay, network.alpha)

    values = outage_indicators(i_d, i_r, h, geometry, params)
    if spec.antithetic:
        values = 0.5 * (values + outage_indicators(i_d, i_r, h_anti, geometry, params))
    return values.sum(axis=0), (values * values).sum(axis=0)


def _chunks(trials: int, size: int) -> list[tuple[int, int]]:
    return [(start, min(start + size, trials)) for start in range(0, trials, size)]


def _column_stats(
    network: NetworkModel,
    geometry: LinkGeometry,
    params: ProtocolParams,
    spec: SimulationSpec,
) -> tuple[np.ndarray, np.ndarray, float, bool]:
    radius, capped = window_radius(network, geometry, spec)
    if capped:
        logger.warning(
            "simulation window capped at radius %.6g; truncated interference may bias results",
            radius,
        )
    chunks = _chunks(spec.trials, spec.chunk_size)
    results = Parallel(n_jobs=spec.threads)(
        delayed(_simulate_chunk)(network, geometry, params, spec, radius, start, stop)
        for start, stop in chunks
    )
    sums = np.zeros(_COLUMNS)
    squares = np.zeros(_COLUMNS)
    for s, q in results:
        sums += s
        squares += q
    return sums, squares, radius, capped


def _stderr(total: float, squares: float, trials: int, antithetic: bool) -> float:
    p = total / trials
    if not antithetic:
        return math.sqrt(max(p * (1.0 - p), 0.0) / trials)
    if trials < 2:
        return 0.0
    var = max(squares / trials - p * p, 0.0) * trials / (trials - 1)
    return math.sqrt(var / trials)


def estimate_outage(
    protocol: Protocol,
    network: NetworkModel,
    geometry: LinkGeometry,
    params: ProtocolParams,
    spec: SimulationSpec,
) -> OutageEstimate:
    """Fraction of trials in the protocol's outage event.

    CF counts the exact union of its two events. The cut-set entry is the larger
    of its two event frequencies at ``params.rho_mag``.
    """
    if protocol is Protocol.df and params.rho_mag >= 1:
        raise DomainError("DF needs |rho| < 1")
    sums, squares, radius, capped = _column_stats(network, geometry, params, spec)

    if protocol is Protocol.cutset:
        column = _CUT_FIRST if sums[_CUT_FIRST] >= sums[_CUT_SECOND] else _CUT_SECOND
    else:
        column = {Protocol.direct: _DIRECT, Protocol.df: _DF, Protocol.cf: _CF}[protocol]

    events = float(sums[column])
    value = events / spec.trials
    stderr = _stderr(events, float(squares[column]), spec.trials, spec.antithetic)
    meta: dict = {
        "lambda": network.lam,
        "alpha": network.alpha,
        "distance": geometry.distance,
        "k": geometry.k,
        "theta": geometry.theta,
        "threshold": params.threshold,
        "rho_mag": params.rho_mag,
        "trials": spec.trials,
        "events": events,
        "seed": spec.seed,
        "antithetic": spec.antithetic,
        "window_radius": radius,
        "window_capped": capped,
    }
    if protocol is Protocol.cf:
        meta["w_c"] = params.w_c
    if protocol is Protocol.cutset:
        meta["p_first"] = float(sums[_CUT_FIRST]) / spec.trials
        meta["p_second"] = float(sums[_CUT_SECOND]) / spec.trials
    if network.lam > 0 and events < MIN_EVENTS:
        meta["warning"] = (
            f"only {events:g} outage events in {spec.trials} trials; increase trials"
        )
        logger.warning("%s: %s", protocol.value, meta["warning"])

    return OutageEstimate(
        protocol=protocol,
        kind=EstimateKind.monte_carlo,
        value=min(max(value, 0.0), 1.0),
        stderr=stderr,
        metadata=meta,
    )


def estimate_transform(
    omega1: float,
    omega2: float,
    network: NetworkModel,
    geometry: LinkGeometry,
    spec: SimulationSpec,
) -> tuple[float, float]:
    """Sample mean and standard error of exp(-omega1 I_d - omega2 I_r)."""
    radius, _ = window_radius(network, geometry, spec)
    values = np.empty(spec.trials)
    for trial in range(spec.trials):
        rng = trial_generator(spec.seed, trial)
        _, _, positions, marks_d, marks_r = _draw_scene(network, geometry, spec, radius, rng)
        i_d = _interference(positions, marks_d, geometry.destination, network.alpha)
        i_r = _interference(positions, marks_r, geometry.relay, network.alpha)
        values[trial] = math.exp(-omega1 * i_d - omega2 * i_r)
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(spec.trials)) if spec.trials > 1 else 0.0
    return mean, stderr

"""Laplace transforms of the interference observed at the destination and the relay.

For a Poisson field of density ``lam`` with unit-mean exponential marks and path loss
``|x| ** -alpha`` the transform at one point is ``exp(-lam * C * w ** (2 / alpha))``.
Observing the same field at d and r couples the two sums through

    f(w1, w2) = integral over the plane of
                w1 * w2 / ((w1 + |x - d| ** alpha) * (w2 + |x - r| ** alpha))

and E[exp(-w1 I_d - w2 I_r)] = exp(-lam * (C w1^delta + C w2^delta - f)). The sign
on f follows from the probability generating functional, which ``pgfl_joint_oracle``
integrates directly.
"""

from __future__ import annotations

import functools
import logging
import math
import warnings
from collections.abc import Callable, Sequence
from dataclasses import dataclass

from scipy import integrate, special
from scipy.integrate import IntegrationWarning

from relayfield.config import settings
from relayfield.errors import DivergenceError, DomainError, QuadratureAccuracyError
from relayfield.models import JointTransformArgs, LinkGeometry, NetworkModel, QuadratureSpec

logger = logging.getLogger("relayfield.interference")

# exp(-x) is exactly 0.0 in double precision past this point.
EXP_UNDERFLOW = 745.0

_DEFAULT_QUAD = QuadratureSpec()

Point = tuple[float, float]


def constant_C(alpha: float) -> float:  # noqa: N802
    """C(alpha) = 2 pi Gamma(2/alpha) Gamma(1 - 2/alpha) / alpha."""
    if not alpha > 2:
        raise DivergenceError(f"C(alpha) diverges for alpha <= 2, got {alpha}")
    delta = 2.0 / alpha
    return float(2.0 * math.pi * special.gamma(delta) * special.gamma(1.0 - delta) / alpha)


def _check_omegas(*omegas: float) -> None:
    for w in omegas:
        if not w >= 0:
            raise DomainError(f"transform argument must be >= 0, got {w}")


def marginal_exponent(omega: float, network: NetworkModel) -> float:
    """-ln L_I(omega) = lam * C * omega ** (2 / alpha)."""
    _check_omegas(omega)
    if omega == 0 or network.lam == 0:
        return 0.0
    return network.lam * constant_C(network.alpha) * omega**network.delta


def laplace_marginal(omega: float, network: NetworkModel) -> float:
    return math.exp(-marginal_exponent(omega, network))


# ---------------------------------------------------------------------------
# Planar quadrature
# ---------------------------------------------------------------------------


class _BudgetExhausted(Exception):
    pass


@dataclass
class _Budget:
    limit: int
    used: int = 0

    def spend(self) -> None:
        self.used += 1
        if self.used > self.limit:
            raise _BudgetExhausted


@dataclass(frozen=True)
class _PowerTail:
    """Integrand bounded by ``scale / (2 pi) * (rho - offset) ** -(power + 2)`` past offset."""

    scale: float
    power: float
    offset: float

    def asymptotic(self, radius: float) -> float:
        return self.scale * radius**-self.power / self.power

    def bound(self, radius: float) -> float:
        t = radius - self.offset
        p = self.power
        return self.scale * (t**-p / p + self.offset * t ** (-p - 1.0) / (p + 1.0))

    def radius_for(self, target: float) -> float:
        return self.offset + (2.0 * self.scale / (self.power * target)) ** (1.0 / self.power)


def _angular_breakpoints(rho: float, half_sep: float, scales: Sequence[float]) -> list[float]:
    # Angles at which the distance to d (phi = 0) or r (phi = pi) equals each scale.
    if rho == 0 or half_sep == 0:
        return []
    reach = 2.0 * math.sqrt(rho * half_sep)
    pts = set()
    for s in scales:
        if s < reach:
            phi = 2.0 * math.asin(s / reach)
            pts.update((phi, math.pi - phi))
    return sorted(p for p in pts if 0.0 < p < math.pi)


def integrate_plane(
    kernel: Callable[[float, float], float],
    half_sep: float,
    scales: Sequence[float],
    tail: _PowerTail,
    quad: QuadratureSpec,
    label: str,
) -> float:
    """Integrate ``kernel(phi, rho)`` over the plane.

    Polar coordinates are centred on the midpoint of d = (+half_sep, 0) and
    r = (-half_sep, 0); the kernel must be symmetric under phi -> -phi so only the
    upper half-plane is integrated. The disk is widened until the tail bound falls
    below ``rel_tol`` times the running estimate, and the asymptotic tail beyond
    the final radius is added.
    """
    budget = _Budget(quad.max_evaluations)
    inner_tol = 0.1 * quad.rel_tol

    def counted(phi: float, rho: float) -> float:
        budget.spend()
        return kernel(phi, rho)

    def angular(rho: float) -> float:
        pts = _angular_breakpoints(rho, half_sep, scales)
        val, _ = integrate.quad(
            counted,
            0.0,
            math.pi,
            args=(rho,),
            points=pts or None,
            epsabs=0.0,
            epsrel=inner_tol,
            limit=200,
        )
        return rho * val

    def angular_log(u: float) -> float:
        rho = math.exp(u)
        return rho * angular(rho)

    radius = quad.radius_scale * max(half_sep, *scales) + half_sep
    outer_pts = sorted(
        {p for s in scales for p in (half_sep - s, half_sep, half_sep + s) if 0.0 < p < radius}
    )
    value = 0.0
    error = 0.0
    with warnings.catch_warnings(record=True) as messages:
        warnings.simplefilter("always", category=IntegrationWarning)
        try:
            value, error = integrate.quad(
                angular,
                0.0,
                radius,
                points=outer_pts or None,
                epsabs=0.0,
                epsrel=quad.rel_tol,
                limit=200,
            )
            for _ in range(quad.max_radius_steps):
                if tail.bound(radius) <= quad.rel_tol * 2.0 * value:
                    break
                target = quad.rel_tol * 2.0 * value if value > 0 else quad.rel_tol
                new_radius = max(tail.radius_for(target), 1.5 * radius)
                piece, piece_err = integrate.quad(
                    angular_log,
                    math.log(radius),
                    math.log(new_radius),
                    epsabs=0.0,
                    epsrel=quad.rel_tol,
                    limit=200,
                )
                value += piece
                error += piece_err
                radius = new_radius
            else:
                logger.warning(
                    "%s: tail bound %.3g above tolerance at radius %.6g",
                    label,
                    tail.bound(radius),
                    radius,
                )
        except _BudgetExhausted:
            raise QuadratureAccuracyError(
                f"{label}: evaluation budget of {quad.max_evaluations} exhausted",
                estimate=2.0 * value,
                error_bound=math.inf,
            ) from None

    if messages:
        logger.warning(
            "%s: %d quadrature warnings, first: %s", label, len(messages), messages[0].message
        )

    total = 2.0 * value + tail.asymptotic(radius)
    error_bound = 2.0 * error + tail.bound(radius)
    if error_bound > math.sqrt(quad.rel_tol) * total:
        raise QuadratureAccuracyError(
            f"{label}: tolerance not reached", estimate=total, error_bound=error_bound
        )
    logger.debug(
        "%s = %.12g (error %.3g, radius %.6g, %d evaluations)",
        label,
        total,
        error_bound,
        radius,
        budget.used,
    )
    return total


# ---------------------------------------------------------------------------
# Coupling integral and joint transform
# ---------------------------------------------------------------------------


def _coupling_uncached(
    omega1: float, omega2: float, separation: float, alpha: float, quad: QuadratureSpec
) -> float:
    half_sep = 0.5 * separation
    half_alpha = 0.5 * alpha

    def kernel(phi: float, rho: float) -> float:
        s = math.sin(0.5 * phi)
        c = math.cos(0.5 * phi)
        base = (rho - half_sep) ** 2
        cross = 4.0 * rho * half_sep
        qd = base + cross * s * s
        qr = base + cross * c * c
        return (omega1 / (omega1 + qd**half_alpha)) * (omega2 / (omega2 + qr**half_alpha))

    scales = (omega1 ** (1.0 / alpha), omega2 ** (1.0 / alpha))
    tail = _PowerTail(
        scale=2.0 * math.pi * omega1 * omega2, power=2.0 * alpha - 2.0, offset=half_sep
    )
    raw = integrate_plane(kernel, half_sep, scales, tail, quad, "coupling f")

    cap = constant_C(alpha) * min(omega1, omega2) ** (2.0 / alpha)
    if raw > cap or raw < 0:
        logger.debug("clamping coupling integral %.12g into [0, %.12g]", raw, cap)
    return min(max(raw, 0.0), cap)


_coupling_cached = functools.lru_cache(maxsize=settings.coupling_cache_size)(_coupling_uncached)


def clear_coupling_cache() -> None:
    _coupling_cached.cache_clear()


def coupling_cache_info() -> functools._CacheInfo:
    return _coupling_cached.cache_info()


def coupling_between(
    omega1: float,
    omega2: float,
    d: Point,
    r: Point,
    alpha: float,
    quad: QuadratureSpec | None = None,
) -> float:
    """Coupling integral for arbitrary observation points; d = r is allowed."""
    _check_omegas(omega1, omega2)
    if omega1 == 0 or omega2 == 0:
        return 0.0
    separation = math.hypot(d[0] - r[0], d[1] - r[1])
    # f is symmetric in (omega1, omega2) once the plane is reflected, so both
    # orders share a cache slot.
    lo, hi = sorted((float(omega1), float(omega2)))
    return _coupling_cached(lo, hi, separation, float(alpha), quad or _DEFAULT_QUAD)


def coupling_integral_f(args: JointTransformArgs, quad: QuadratureSpec | None = None) -> float:
    geometry = args.geometry
    return coupling_between(
        args.omega1, args.omega2, geometry.destination, geometry.relay, args.network.alpha, quad
    )


def joint_exponent(
    omega1: float,
    omega2: float,
    geometry: LinkGeometry,
    network: NetworkModel,
    quad: QuadratureSpec | None = None,
) -> float:
    """-ln E[exp(-omega1 I_d - omega2 I_r)].

    Once even the larger marginal exponent underflows exp(), f is skipped and that
    marginal exponent (a lower bound) is returned.
    """
    _check_omegas(omega1, omega2)
    m1 = marginal_exponent(omega1, network)
    m2 = marginal_exponent(omega2, network)
    if m1 == 0 or m2 == 0:
        return m1 + m2
    if max(m1, m2) > EXP_UNDERFLOW:
        return max(m1, m2)
    f = coupling_between(omega1, omega2, geometry.destination, geometry.relay, network.alpha, quad)
    return max(m1 + m2 - network.lam * f, max(m1, m2))


def laplace_joint(args: JointTransformArgs, quad: QuadratureSpec | None = None) -> float:
    return math.exp(-joint_exponent(args.omega1, args.omega2, args.geometry, args.network, quad))


# ---------------------------------------------------------------------------
# Validation oracles
# ---------------------------------------------------------------------------


def pgfl_joint_exponent(
    omega1: float,
    omega2: float,
    d: Point,
    r: Point,
    network: NetworkModel,
    quad: QuadratureSpec | None = None,
) -> float:
    """lam * integral of (1 - 1 / ((1 + w1 l(x, d)) (1 + w2 l(x, r)))) dx, integrated directly."""
    _check_omegas(omega1, omega2)
    if network.lam == 0 or (omega1 == 0 and omega2 == 0):
        return 0.0
    alpha = network.alpha
    half_sep = 0.5 * math.hypot(d[0] - r[0], d[1] - r[1])
    half_alpha = 0.5 * alpha

    def kernel(phi: float, rho: float) -> float:
        s = math.sin(0.5 * phi)
        c = math.cos(0.5 * phi)
        base = (rho - half_sep) ** 2
        cross = 4.0 * rho * half_sep
        a = omega1 / (omega1 + (base + cross * s * s) ** half_alpha)
        b = omega2 / (omega2 + (base + cross * c * c) ** half_alpha)
        return a + b - a * b

    scales = [w ** (1.0 / alpha) for w in (omega1, omega2) if w > 0]
    tail = _PowerTail(scale=2.0 * math.pi * (omega1 + omega2), power=alpha - 2.0, offset=half_sep)
    return network.lam * integrate_plane(
        kernel, half_sep, scales, tail, quad or _DEFAULT_QUAD, "pgfl exponent"
    )


def pgfl_joint_oracle(args: JointTransformArgs, quad: QuadratureSpec | None = None) -> float:
    geometry = args.geometry
    return math.exp(
        -pgfl_joint_exponent(
            args.omega1, args.omega2, geometry.destination, geometry.relay, args.network, quad
        )
    )


def coincident_coupling(omega: float, alpha: float) -> float:
    """Closed form of f(w, w) when d = r: C * w^delta * (1 - delta)."""
    _check_omegas(omega)
    delta = 2.0 / alpha
    return constant_C(alpha) * omega**delta * (1.0 - delta)

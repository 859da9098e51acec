"""Adaptive quadrature and root finding for the self-consistency equations"""

import logging
import math
from typing import Callable, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from .models import Quadrature, SolverConfig

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps

# 15-point Kronrod rule with its embedded 7-point Gauss rule (QUADPACK qk15).
_XGK = np.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ]
)
_WGK = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ]
)
_WG = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ]
)

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_gauss_half = np.zeros(8)
_gauss_half[1::2] = _WG
_GAUSS_WEIGHTS = np.concatenate([_gauss_half[:-1], _gauss_half[::-1]])


class NumericsError(Exception):
    """Base class for quadrature and solver failures"""

    pass


class IntegrationError(NumericsError):
    """Adaptive quadrature hit its subdivision limit"""

    def __init__(self, message: str, estimate: float, error_bound: float):
        super().__init__(f"{message} (estimate {estimate!r}, error bound {error_bound!r})")
        self.estimate = estimate
        self.error_bound = error_bound


class ConvergenceError(NumericsError):
    """Root finder did not meet its tolerance"""

    def __init__(self, message: str, last_iterate: np.ndarray, residual_norm: float):
        super().__init__(f"{message} (residual norm {residual_norm!r})")
        self.last_iterate = np.asarray(last_iterate, dtype=float)
        self.residual_norm = residual_norm


class NoBracketError(NumericsError):
    """Bracketing interval without a sign change"""

    pass


# ---------------------------------------------------------------------------
# quadrature


def _kronrod_panels(
    f: Callable[[np.ndarray], np.ndarray], lower: np.ndarray, upper: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Kronrod estimate, error estimate and integral of |f| for each panel"""
    centre = 0.5 * (lower + upper)
    half = 0.5 * (upper - lower)
    x = centre[:, None] + half[:, None] * _NODES[None, :]
    values = np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)
    kronrod = half * (values @ _KRONROD_WEIGHTS)
    gauss = half * (values @ _GAUSS_WEIGHTS)
    absolute = np.abs(half) * (np.abs(values) @ _KRONROD_WEIGHTS)
    mean = 0.5 * (values @ _KRONROD_WEIGHTS)
    spread = np.abs(half) * (np.abs(values - mean[:, None]) @ _KRONROD_WEIGHTS)
    error = np.abs(kronrod - gauss)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = spread * np.minimum(1.0, (200.0 * error / spread) ** 1.5)
    error = np.where((spread > 0) & (error > 0), scaled, error)
    error = np.maximum(error, 50.0 * _EPS * absolute)
    if not np.all(np.isfinite(kronrod)):
        raise IntegrationError(
            "Integrand is not finite on the interval", float("nan"), float("inf")
        )
    return kronrod, error, absolute


def _breaks(a: float, b: float, points: Iterable[float]) -> np.ndarray:
    inner = [p for p in points if a < p < b]
    return np.unique(np.concatenate([[a], inner, [b]]))


def integrate_finite(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    q: Optional[Quadrature] = None,
    points: Sequence[float] = (),
) -> float:
    """Adaptive Gauss-Kronrod integral of a vectorized f over [a, b].

    The interval is first cut at the optional break points and into
    ``q.panels`` equal panels per piece; panels whose error exceeds their
    share of the tolerance are bisected until the summed error estimate falls
    below ``q.rtol`` times the integral, the absolute floor ``q.atol`` or the
    roundoff floor, whichever is largest.
    """
    q = q or Quadrature()
    if not b > a:
        raise ValueError(f"Integration bounds must satisfy a < b: [{a}, {b}]")
    edges = _breaks(a, b, points)
    fractions = np.linspace(0.0, 1.0, q.panels + 1)
    lower = np.concatenate(
        [lo + (hi - lo) * fractions[:-1] for lo, hi in zip(edges[:-1], edges[1:])]
    )
    upper = np.concatenate(
        [lo + (hi - lo) * fractions[1:] for lo, hi in zip(edges[:-1], edges[1:])]
    )
    values, errors, absolute = _kronrod_panels(f, lower, upper)

    while True:
        total = float(np.sum(values))
        error = float(np.sum(errors))
        tolerance = max(
            q.rtol * abs(total), q.atol, 100.0 * _EPS * float(np.sum(absolute))
        )
        if error <= tolerance:
            return total
        share = tolerance / len(values)
        split = errors > share
        split[np.argmax(errors)] = True
        if len(values) + int(split.sum()) > q.max_subdivisions:
            raise IntegrationError(
                f"Quadrature on [{a}, {b}] exceeded {q.max_subdivisions} panels", total, error
            )
        lo, hi = lower[split], upper[split]
        if np.any(hi - lo <= 4.0 * _EPS * np.maximum(np.abs(lo), np.abs(hi))):
            raise IntegrationError(
                f"Quadrature on [{a}, {b}] reached the resolution limit", total, error
            )
        mid = 0.5 * (lo + hi)
        new_lower = np.concatenate([lo, mid])
        new_upper = np.concatenate([mid, hi])
        new_values, new_errors, new_absolute = _kronrod_panels(f, new_lower, new_upper)
        keep = ~split
        lower = np.concatenate([lower[keep], new_lower])
        upper = np.concatenate([upper[keep], new_upper])
        values = np.concatenate([values[keep], new_values])
        errors = np.concatenate([errors[keep], new_errors])
        absolute = np.concatenate([absolute[keep], new_absolute])


def integrate_semi_infinite(
    f: Callable[[np.ndarray], np.ndarray],
    weight: str = "sqrt",
    scale: float = 0.0,
    q: Optional[Quadrature] = None,
    width: float = 1.0,
    points: Sequence[float] = (),
) -> float:
    """Integral of sqrt(eps) f(eps) over [0, inf).

    f must decay at least exponentially beyond ``scale`` on the energy scale
    ``width``; the range is truncated at scale + q.tail * width. The root
    singularity is removed by eps = s^2, so the integrand becomes 2 s^2 f(s^2).
    Break points are given in eps.
    """
    q = q or Quadrature()
    if weight != "sqrt":
        raise ValueError(f"Unsupported weight: {weight}")
    if width <= 0:
        raise ValueError(f"Decay width must be positive: {width}")
    cutoff = max(scale, 0.0) + q.tail * width
    s_max = math.sqrt(cutoff)
    s_points = [math.sqrt(p) for p in points if 0.0 < p < cutoff]

    def substituted(s: np.ndarray) -> np.ndarray:
        return 2.0 * s * s * f(s * s)

    return integrate_finite(substituted, 0.0, s_max, q, s_points)


def gauss_legendre_rule(
    breaks: Sequence[float], order: int = 16
) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on consecutive break intervals"""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.asarray(breaks, dtype=float)
    lower, upper = edges[:-1], edges[1:]
    half = 0.5 * (upper - lower)
    nodes = (0.5 * (upper + lower))[:, None] + half[:, None] * x[None, :]
    weights = half[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


# ---------------------------------------------------------------------------
# root finding


def _max_norm(values: np.ndarray) -> float:
    return float(np.max(np.abs(values))) if values.size else 0.0


def _fd_jacobian(
    fun: Callable[[np.ndarray], np.ndarray], x: np.ndarray, r: np.ndarray, step: float
) -> np.ndarray:
    jacobian = np.empty((r.size, x.size))
    for i in range(x.size):
        h = step * max(1.0, abs(x[i]))
        shifted = x.copy()
        shifted[i] += h
        jacobian[:, i] = (fun(shifted) - r) / h
    return jacobian


def _coordinate_bisection(
    fun: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    r: np.ndarray,
    span: np.ndarray,
    cfg: SolverConfig,
) -> np.ndarray:
    """One Gauss-Seidel sweep solving each equation for its own unknown by bisection"""
    x = x.copy()
    for i in range(x.size):
        reach = max(2.0 * abs(span[i]), cfg.fd_step * max(1.0, abs(x[i])))

        def component(value: float, index: int = i) -> float:
            trial = x.copy()
            trial[index] = value
            return float(fun(trial)[index])

        lo, hi = x[i] - reach, x[i] + reach
        try:
            x[i] = solve_bracketed(component, lo, hi, cfg)
        except NoBracketError:
            continue
    return x


def _damped_newton(
    fun: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, cfg: SolverConfig
) -> np.ndarray:
    x = x0.copy()
    r = fun(x)
    norm = _max_norm(r)
    if not np.isfinite(norm):
        raise ConvergenceError("Residual is not finite at the starting point", x, norm)
    low, high = cfg.damping
    for iteration in range(cfg.max_iterations):
        if norm <= cfg.residual_tolerance:
            return x
        jacobian = _fd_jacobian(fun, x, r, cfg.fd_step)
        if not np.all(np.isfinite(jacobian)):
            raise ConvergenceError("Finite-difference Jacobian is not finite", x, norm)
        step = np.linalg.lstsq(jacobian, -r, rcond=None)[0]
        damping = high
        accepted = False
        while damping >= low:
            trial = x + damping * step
            trial_r = fun(trial)
            trial_norm = _max_norm(trial_r)
            if np.isfinite(trial_norm) and trial_norm < norm:
                accepted = True
                break
            damping *= 0.5
        if not accepted:
            trial = _coordinate_bisection(fun, x, r, step, cfg)
            trial_r = fun(trial)
            trial_norm = _max_norm(trial_r)
            if not trial_norm < norm:
                raise ConvergenceError("Newton step and coordinate bisection stalled", x, norm)
        logger.debug("newton iteration %d: residual %.3e -> %.3e", iteration, norm, trial_norm)
        moved = _max_norm(trial - x)
        x, r, norm = trial, trial_r, trial_norm
        if moved <= cfg.step_tolerance * max(1.0, _max_norm(x)) and norm > cfg.residual_tolerance:
            raise ConvergenceError("Newton iteration stagnated", x, norm)
    if norm <= cfg.residual_tolerance:
        return x
    raise ConvergenceError(f"No convergence in {cfg.max_iterations} iterations", x, norm)


def solve_system(
    residual: Callable[[np.ndarray], Sequence[float]],
    initial: Sequence[float],
    cfg: Optional[SolverConfig] = None,
) -> np.ndarray:
    """Root of a vector function with max-norm residual below the tolerance.

    MINPACK's hybrid method runs first; if it stops short of the residual
    tolerance, a damped Newton iteration with a finite-difference Jacobian
    takes over from its last point.
    """
    cfg = cfg or SolverConfig()
    x0 = np.atleast_1d(np.asarray(initial, dtype=float))

    def fun(x: np.ndarray) -> np.ndarray:
        return np.atleast_1d(np.asarray(residual(x), dtype=float))

    start = x0
    try:
        solution = optimize.root(
            fun,
            x0,
            method="hybr",
            options={"xtol": cfg.step_tolerance, "maxfev": 50 * cfg.max_iterations},
        )
        if np.all(np.isfinite(solution.x)):
            reached = _max_norm(fun(solution.x))
            if reached <= cfg.residual_tolerance:
                return solution.x
            if np.isfinite(reached):
                start = solution.x
        logger.debug("hybr stopped: %s", solution.message)
    except NumericsError as exc:
        logger.debug("hybr failed: %s", exc)
    try:
        return _damped_newton(fun, start, cfg)
    except NumericsError:
        if start is x0:
            raise
        return _damped_newton(fun, x0, cfg)


def solve_bracketed(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    cfg: Optional[SolverConfig] = None,
) -> float:
    """Root of f in [lo, hi] by Brent's method (bisection with secant steps)"""
    cfg = cfg or SolverConfig()
    f_lo = f(lo)
    if f_lo == 0.0:
        return lo
    f_hi = f(hi)
    if f_hi == 0.0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise NoBracketError(f"No sign change on [{lo}, {hi}]: f = {f_lo}, {f_hi}")
    try:
        return float(
            optimize.brentq(
                f,
                lo,
                hi,
                xtol=cfg.step_tolerance,
                rtol=4.0 * _EPS,
                maxiter=cfg.max_iterations,
            )
        )
    except RuntimeError as exc:
        raise ConvergenceError(str(exc), np.array([lo, hi]), float("nan")) from exc

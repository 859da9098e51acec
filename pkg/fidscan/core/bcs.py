"""BCS superconductor with a constant pairing interaction inside the Debye window.

Energies and temperatures are in units of the Debye energy, the coupling is
v = D_F V and nu is the number of modes per unit energy. The chemical
potential stays at the Fermi level. The gap equation reads

    1 = v int_0^1 tanh(sqrt(x^2 + d^2) / 2t) / sqrt(x^2 + d^2) dx.
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import algebra
from .models import (
    BcsParams,
    BcsState,
    DomainError,
    Field,
    ModePoint,
    ModeTriple,
    ParameterPoint,
    Quadrature,
    SolverConfig,
    SpinVector,
    UhlmannSample,
)
from .numerics import gauss_legendre_rule, integrate_finite, solve_bracketed
from .stoner import commuting_log_fidelity

logger = logging.getLogger(__name__)

CONVENTIONS = ("integral", "spin-summed")

GRID_NODES = 2001
GRID_ORDER = 16
GRID_FINEST = 1e-4

_LOG2 = math.log(2.0)
_GAP_SOLVER = SolverConfig(step_tolerance=1e-15)


# ---------------------------------------------------------------------------
# gap equation


def gap_integral(delta: float, t: float, q: Optional[Quadrature] = None) -> float:
    """int_0^1 tanh(E / 2t) / E dx with E = sqrt(x^2 + delta^2)"""
    q = q or Quadrature()
    if delta < 0 or t < 0:
        raise DomainError(f"Gap and temperature must be non-negative: {delta}, {t}")
    if delta > 0:
        top = math.asinh(1.0 / delta)
        if t == 0:
            return top

        # x = delta sinh(theta) turns the integrand into tanh(delta cosh(theta) / 2t)
        def integrand(theta: np.ndarray) -> np.ndarray:
            return np.tanh(delta * np.cosh(theta) / (2.0 * t))

        return integrate_finite(integrand, 0.0, top, q)
    if t == 0:
        return math.inf

    def linearized(x: np.ndarray) -> np.ndarray:
        safe = np.where(x > 0, x, 1.0)
        return np.where(x > 0, np.tanh(safe / (2.0 * t)) / safe, 1.0 / (2.0 * t))

    count = int(np.clip(math.ceil(math.log2(1.0 / (2.0 * t))), 1, 64)) if t < 0.5 else 1
    points = np.geomspace(min(2.0 * t, 1.0), 1.0, count)
    return integrate_finite(linearized, 0.0, 1.0, q, points)


def gap_residual(delta: float, v: float, t: float, q: Optional[Quadrature] = None) -> float:
    return v * gap_integral(delta, t, q) - 1.0


def zero_t_gap(v: float, convention: str = "integral") -> float:
    """Zero-temperature gap, 1/sinh(1/v) from the integral equation.

    The "spin-summed" convention halves the density of states and gives
    1/sinh(2/v) instead.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"Invalid gap convention: {convention}")
    if v < 0:
        raise DomainError(f"Coupling v must be non-negative: {v}")
    if v == 0:
        return 0.0
    x = (1.0 if convention == "integral" else 2.0) / v
    return 2.0 * math.exp(-x) / -math.expm1(-2.0 * x)


def solve_gap(
    v: float,
    t: float,
    upper: Optional[float] = None,
    q: Optional[Quadrature] = None,
    cfg: Optional[SolverConfig] = None,
) -> BcsState:
    """Gap at (v, t).

    upper bounds the search, typically the gap at the next lower temperature
    of the same coupling; upper = 0 marks a point already in the normal phase.
    """
    if v < 0 or t < 0:
        raise DomainError(f"Coupling and temperature must be non-negative: v={v}, t={t}")
    q = q or Quadrature()
    cfg = cfg or _GAP_SOLVER
    if v == 0 or (upper is not None and upper <= 0):
        return BcsState(gap=0.0)
    ceiling = zero_t_gap(v)
    if t == 0:
        return BcsState(gap=ceiling, residual=abs(gap_residual(ceiling, v, 0.0)))
    if gap_residual(0.0, v, t, q) <= 0:
        return BcsState(gap=0.0)
    if upper is not None:
        ceiling = min(ceiling, upper)
    top = gap_residual(ceiling, v, t, q)
    if top >= 0:
        # saturated at the zero-temperature value (or at the continuation bound)
        return BcsState(gap=ceiling, residual=abs(top))

    def residual(delta: float) -> float:
        return gap_residual(delta, v, t, q)

    gap = solve_bracketed(residual, 0.0, ceiling, cfg)
    return BcsState(gap=gap, residual=abs(residual(gap)))


def critical_temperature(v: float, q: Optional[Quadrature] = None) -> float:
    """t_c(v), root of v int_0^1 tanh(x / 2t) / x dx = 1"""
    if v < 0:
        raise DomainError(f"Coupling v must be non-negative: {v}")
    if v == 0:
        return 0.0
    lower = 0.5 * math.exp(-1.0 / v)
    if lower == 0.0:
        return 0.0

    def residual(log_t: float) -> float:
        return gap_residual(0.0, v, math.exp(log_t), q)

    return math.exp(solve_bracketed(residual, math.log(lower), math.log(0.5 * v)))


# ---------------------------------------------------------------------------
# per-mode closed forms


def nambu_vector(point: ModePoint) -> SpinVector:
    return SpinVector.nambu(point.beta, point.gap, point.eps)


def mode_log_triple(pa: ModePoint, pb: ModePoint) -> Tuple[Field, Field, Field]:
    """(ln F_k, ln C_k, ln H_k) of the modes described by pa and pb, vectorized over eps"""
    a = nambu_vector(pa)
    b = nambu_vector(pb)
    norm_a = algebra.physical_norm(a)
    norm_b = algebra.physical_norm(b)
    denominator = 0.5 * (
        algebra.log_one_plus_cosh(0.5 * norm_a) + algebra.log_one_plus_cosh(0.5 * norm_b)
    )
    # cosh(c/2) = sqrt((1 + cosh c) / 2)
    log_cosh_half_c = 0.5 * (np.logaddexp(0.0, algebra.log_cosh_c(a, b)) - _LOG2)
    log_f = np.logaddexp(0.0, log_cosh_half_c) - denominator
    mean = (a + b).scaled(0.5)
    log_c = algebra.log_one_plus_cosh(0.5 * algebra.physical_norm(mean)) - denominator
    log_h = np.logaddexp(0.0, algebra.log_cosh_c(a.scaled(0.5), b.scaled(0.5))) - denominator
    # identical modes, e.g. two normal-phase states at one temperature
    same = (a.h_plus == b.h_plus) & (a.h_minus == b.h_minus) & (a.h_zero == b.h_zero)
    return tuple(np.where(same, 0.0, value) for value in (log_f, log_c, log_h))


def mode_generator(point: ModePoint) -> np.ndarray:
    return algebra.operator_form(nambu_vector(point), "bcs")


def mode_uhlmann(pa: ModePoint, pb: ModePoint) -> UhlmannSample:
    """Uhlmann connection of one mode, with the H - F trace identity residual"""
    rho_a = algebra.gibbs_state(mode_generator(pa))
    rho_b = algebra.gibbs_state(mode_generator(pb))
    polar = algebra.polar_unitary(rho_a, rho_b)
    if polar.degenerate:
        logger.debug("Degenerate polar decomposition at eps=%g", float(pa.eps))
    return UhlmannSample(
        eps=float(pa.eps),
        uhl_dev=algebra.uhlmann_deviation(polar.unitary, algebra.PAIR_BLOCK),
        identity_residual=algebra.trace_identity_residual(rho_a, rho_b, polar),
    )


def mode_triple(pa: ModePoint, pb: ModePoint) -> ModeTriple:
    log_f, log_c, log_h = mode_log_triple(pa, pb)
    return ModeTriple(
        f=float(np.exp(log_f)),
        c=float(np.exp(log_c)),
        h=float(np.exp(log_h)),
        uhl_dev=mode_uhlmann(pa, pb).uhl_dev,
    )


# ---------------------------------------------------------------------------
# mode sums


def mode_density_grid(
    n_nodes: int = GRID_NODES, order: int = GRID_ORDER
) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on [-1, 1], graded geometrically towards 0.

    Each half carries round(n_nodes / 2 order) panels, so the node count is
    the nearest multiple of 2 order.
    """
    panels = max(1, int(round(n_nodes / (2.0 * order))))
    breaks = np.concatenate([[0.0], np.geomspace(GRID_FINEST, 1.0, panels)])
    nodes, weights = gauss_legendre_rule(breaks, order)
    return np.concatenate([-nodes[::-1], nodes]), np.concatenate([weights[::-1], weights])


def _states(
    p: BcsParams, state_a: Optional[BcsState], state_b: Optional[BcsState]
) -> Tuple[BcsState, BcsState]:
    if state_a is None:
        state_a = solve_gap(p.v, p.t)
    if state_b is None:
        neighbor = p.neighbor()
        state_b = solve_gap(neighbor.v, neighbor.t)
    return state_a, state_b


def _outside_window(p: BcsParams, q: Quadrature) -> float:
    """ln F of the unpaired modes beyond the Debye window, both sides together"""
    beta_a = 1.0 / p.t
    beta_b = 1.0 / (p.t + p.dt)

    def integrand(eps: np.ndarray) -> np.ndarray:
        return commuting_log_fidelity(-beta_a * eps, 0.0, -beta_b * eps, 0.0)

    top = 1.0 + q.tail * max(p.t, p.t + p.dt)
    return 2.0 * p.nu * integrate_finite(integrand, 1.0, top, q)


def total_log_fidelity(
    p: BcsParams,
    state_a: Optional[BcsState] = None,
    state_b: Optional[BcsState] = None,
    grid: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    q: Optional[Quadrature] = None,
) -> Tuple[float, float, float]:
    """(ln F, ln C, ln H) summed over modes: nu times the integral over eps"""
    if not p.t > 0:
        raise DomainError(f"Total fidelity needs t > 0: {p.t}")
    if p.dt == 0.0 and p.dv == 0.0:
        return 0.0, 0.0, 0.0
    q = q or Quadrature()
    state_a, state_b = _states(p, state_a, state_b)
    nodes, weights = grid if grid is not None else mode_density_grid()
    pa = ModePoint(p.t, state_a.gap, nodes)
    pb = ModePoint(p.t + p.dt, state_b.gap, nodes)
    per_f, per_c, per_h = mode_log_triple(pa, pb)
    # C and H accumulate as offsets from F
    log_f = p.nu * float(weights @ per_f)
    log_c = log_f + p.nu * float(weights @ (per_c - per_f))
    log_h = log_f + p.nu * float(weights @ (per_h - per_f))
    if p.dt != 0.0:
        tail = _outside_window(p, q)
        log_f, log_c, log_h = log_f + tail, log_c + tail, log_h + tail
    return log_f, log_c, log_h


def total_fidelity(
    p: BcsParams,
    state_a: Optional[BcsState] = None,
    state_b: Optional[BcsState] = None,
    grid: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    q: Optional[Quadrature] = None,
) -> Tuple[float, float, float]:
    """(F, C, H) between the equilibrium states at p and at its neighbor"""
    log_f, log_c, log_h = total_log_fidelity(p, state_a, state_b, grid, q)
    return math.exp(log_f), math.exp(log_c), math.exp(log_h)


def zero_t_fidelity(
    va: float,
    vb: float,
    nu: float,
    grid: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> float:
    """Ground-state fidelity, the product over modes of |cos((theta_a - theta_b) / 2)|.

    theta is the angle of the mode's Nambu vector, tan(theta) = gap / eps.
    """
    if va < 0 or vb < 0:
        raise DomainError(f"Couplings must be non-negative: {va}, {vb}")
    nodes, weights = grid if grid is not None else mode_density_grid()
    theta_a = np.arctan2(zero_t_gap(va), nodes)
    theta_b = np.arctan2(zero_t_gap(vb), nodes)
    with np.errstate(divide="ignore"):
        per_mode = np.log(np.abs(np.cos(0.5 * (theta_a - theta_b))))
    return math.exp(nu * float(weights @ per_mode))


# ---------------------------------------------------------------------------
# Uhlmann connection


def probe_energies(gap_a: float, gap_b: float, t: float) -> List[float]:
    """Mode energies where the connection is probed: multiples of the largest scale and gap_b"""
    scale = max(gap_a, gap_b, t)
    probes = [scale * factor for factor in (0.25, 0.5, 1.0, 2.0, 4.0)]
    if gap_b > 0:
        probes.append(gap_b)
    return probes


def uhlmann_profile(
    p: BcsParams,
    eps_grid: Sequence[float],
    state_a: Optional[BcsState] = None,
    state_b: Optional[BcsState] = None,
) -> List[UhlmannSample]:
    """Per-mode connection deviation and trace identity residual between p and its neighbor"""
    if not p.t > 0:
        raise DomainError(f"Uhlmann profile needs t > 0: {p.t}")
    state_a, state_b = _states(p, state_a, state_b)
    return [
        mode_uhlmann(
            ModePoint(p.t, state_a.gap, float(eps)),
            ModePoint(p.t + p.dt, state_b.gap, float(eps)),
        )
        for eps in eps_grid
    ]


def loop_composition(
    points: Sequence[ParameterPoint], eps: float, q: Optional[Quadrature] = None
) -> np.ndarray:
    """Ordered product U_{n-1,n} ... U_{1,2} U_{0,1} of pairwise connections around a closed loop"""
    if len(points) < 3:
        raise DomainError(f"A loop needs at least 3 points: {len(points)}")
    if not points[0].same_location(points[-1]):
        raise DomainError("Loop must end where it starts")
    if any(not point.t > 0 for point in points):
        raise DomainError("Loop points need t > 0")
    states = [
        algebra.gibbs_state(
            mode_generator(ModePoint(point.t, solve_gap(point.coupling, point.t, q=q).gap, eps))
        )
        for point in points
    ]
    holonomy = np.eye(4, dtype=complex)
    for rho_a, rho_b in zip(states[:-1], states[1:]):
        holonomy = algebra.polar_unitary(rho_a, rho_b).unitary @ holonomy
    return holonomy

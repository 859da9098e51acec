"""Stoner-Hubbard itinerant magnet: zero-temperature branch, finite-t equilibrium, fidelity.

All energies and temperatures are in units of the Fermi energy of the
paramagnetic gas, u = D_F U, m = M/N is the magnetization per electron and the
system size is n = 3N/4. With these units the self-consistency pair reads

    1 = 3/4 int sqrt(eps) [f(E_up) + f(E_down)] d eps
    m = 3/8 int sqrt(eps) [f(E_up) - f(E_down)] d eps

with E_up,down = eps + 4u/3 (1/2 -+ m) -+ h/2 - mu and h an optional probe field.
"""

import logging
import math
from typing import Iterable, List, Optional, Tuple

import numpy as np
from scipy.special import expit, logsumexp

from . import algebra
from .models import (
    DomainError,
    FermiMomenta,
    Field,
    Quadrature,
    SolverConfig,
    SpinVector,
    StonerFields,
    StonerParams,
    StonerState,
)
from .numerics import (
    ConvergenceError,
    NumericsError,
    gauss_legendre_rule,
    integrate_semi_infinite,
    solve_bracketed,
    solve_system,
)

logger = logging.getLogger(__name__)

CUBE_ROOT_TWO = 2.0 ** (1.0 / 3.0)
FULL_POLARIZATION = 1.5 / CUBE_ROOT_TWO
MAGNETIC_SEED = 0.25

# Solutions closer than this in m are the same branch.
_SAME_BRANCH = 1e-6


def fermi(x: Field) -> Field:
    """Fermi function 1 / (e^x + 1)"""
    return expit(-np.asarray(x, dtype=float))


def dispersions(
    u: float, m: float, mu: float, eps: Field, field: float = 0.0
) -> Tuple[Field, Field]:
    """Mean-field energies (E_up, E_down) of the mode at eps"""
    shift = 4.0 * u * m / 3.0 + 0.5 * field
    base = np.asarray(eps, dtype=float) + 2.0 * u / 3.0 - mu
    return base - shift, base + shift


def fermi_edges(u: float, m: float, mu: float, field: float = 0.0) -> Tuple[float, float]:
    """Mode energies where E_up and E_down cross zero"""
    shift = 4.0 * u * m / 3.0 + 0.5 * field
    base = mu - 2.0 * u / 3.0
    return base + shift, base - shift


def fields(p: StonerParams, state: StonerState) -> StonerFields:
    return StonerFields(beta=p.beta, mu=state.mu, u=p.u, m=state.m, field=p.field)


# ---------------------------------------------------------------------------
# zero temperature


def zero_t_solve(u: float, cfg: Optional[SolverConfig] = None) -> FermiMomenta:
    """Fermi momenta (x, y) = (k_F up, k_F down) / k_F of the ground state.

    For 1 < u < FULL_POLARIZATION the magnetic root follows from s = x + y,
    the root in [2^(1/3), 2] of s^3 - 9 s^2 / 4u + 1 = 0, and p = xy = s^2 - 3s/2u.
    """
    if u < 0:
        raise DomainError(f"Coupling u must be non-negative: {u}")
    if u <= 1.0:
        return FermiMomenta(1.0, 1.0)
    if u >= FULL_POLARIZATION:
        return FermiMomenta(CUBE_ROOT_TWO, 0.0)
    cfg = cfg or SolverConfig()

    def cubic(s: float) -> float:
        return s**3 - 2.25 * s * s / u + 1.0

    s = solve_bracketed(cubic, CUBE_ROOT_TWO, 2.0, cfg)
    split = math.sqrt(max(3.0 * s * (2.0 / u - s), 0.0))
    x, y = 0.5 * (s + split), 0.5 * (s - split)
    return FermiMomenta(x, max(y, 0.0))


def zero_t_derivatives(u: float) -> Tuple[float, float]:
    """(dx/du, dy/du) along the magnetic branch; (0, 0) once fully polarized"""
    if u <= 1.0:
        raise DomainError(f"Derivatives exist only on the magnetic branch u > 1: {u}")
    if u >= FULL_POLARIZATION:
        return 0.0, 0.0
    momenta = zero_t_solve(u)
    x, y = momenta.x, momenta.y
    k = 3.0 * (x + y) / (4.0 * u * u * x * y * (x - y))
    return k * y * y, -k * x * x


def ground_energy(u: float, m: float) -> float:
    """Ground-state energy per electron, kinetic plus interaction"""
    if abs(m) > 0.5:
        raise DomainError(f"Magnetization per electron must lie in [-1/2, 1/2]: {m}")
    kinetic = 0.3 * ((1.0 + 2.0 * m) ** (5.0 / 3.0) + (1.0 - 2.0 * m) ** (5.0 / 3.0))
    return kinetic + u / 3.0 * (1.0 - 4.0 * m * m)


def ground_state_overlap(a: FermiMomenta, b: FermiMomenta, size: float) -> float:
    """1 when both ground states fill the same momentum states, else 0"""
    if size <= 0:
        raise DomainError(f"System size must be positive: {size}")
    filled = 2.0 * size / 3.0
    same_up = round(filled * a.x**3) == round(filled * b.x**3)
    same_down = round(filled * a.y**3) == round(filled * b.y**3)
    return 1.0 if same_up and same_down else 0.0


# ---------------------------------------------------------------------------
# finite temperature


def _semi_infinite(
    p: StonerParams, m: float, mu: float, integrand, q: Quadrature
) -> float:
    edges = fermi_edges(p.u, m, mu, p.field)
    return integrate_semi_infinite(integrand, "sqrt", max(edges), q, p.t, edges)


def equilibrium_residuals(
    p: StonerParams, m: float, mu: float, q: Optional[Quadrature] = None
) -> np.ndarray:
    """Residuals of the particle-number and magnetization equations"""
    q = q or Quadrature()

    def occupied(eps: np.ndarray) -> np.ndarray:
        e_up, e_down = dispersions(p.u, m, mu, eps, p.field)
        return fermi(e_up / p.t) + fermi(e_down / p.t)

    def polarized(eps: np.ndarray) -> np.ndarray:
        e_up, e_down = dispersions(p.u, m, mu, eps, p.field)
        return fermi(e_up / p.t) - fermi(e_down / p.t)

    number = 0.75 * _semi_infinite(p, m, mu, occupied, q)
    magnetization = 0.375 * _semi_infinite(p, m, mu, polarized, q)
    return np.array([number - 1.0, magnetization - m])


def free_energy(
    p: StonerParams, state: StonerState, q: Optional[Quadrature] = None
) -> float:
    """Mean-field free energy per electron, including the mean-field constant"""
    q = q or Quadrature()

    def grand(eps: np.ndarray) -> np.ndarray:
        e_up, e_down = dispersions(p.u, state.m, state.mu, eps, p.field)
        return algebra.softplus(-e_up / p.t) + algebra.softplus(-e_down / p.t)

    omega = 0.75 * p.t * _semi_infinite(p, state.m, state.mu, grand, q)
    return state.mu - omega - 4.0 * p.u / 3.0 * (0.25 - state.m**2)


def _zero_t_seed(u: float, m: float) -> Tuple[float, float]:
    """(m, mu) with mu on the up-spin Fermi surface of a T=0 gas with magnetization m"""
    x = (1.0 + 2.0 * m) ** (1.0 / 3.0)
    return m, x * x + 4.0 * u / 3.0 * (0.5 - m)


def _seeds(p: StonerParams, seed: Optional[StonerState]) -> List[Tuple[str, Tuple[float, float]]]:
    seeds = []
    if seed is not None:
        seeds.append((seed.branch, (seed.m, seed.mu)))
    magnetic = zero_t_solve(p.u).magnetization if p.u > 1.0 else MAGNETIC_SEED
    seeds.append(("magnetic", _zero_t_seed(p.u, magnetic)))
    seeds.append(("paramagnetic", _zero_t_seed(p.u, 0.0)))
    unique, seen = [], set()
    for branch, guess in seeds:
        key = (branch, round(guess[0], 12), round(guess[1], 12))
        if key not in seen:
            seen.add(key)
            unique.append((branch, guess))
    return unique


def solve_equilibrium(
    p: StonerParams,
    seed: Optional[StonerState] = None,
    q: Optional[Quadrature] = None,
    cfg: Optional[SolverConfig] = None,
) -> StonerState:
    """Self-consistent (m, mu) at finite temperature.

    Both branches are followed from their own seeds (plus the caller's seed,
    for continuation) and the one with the lower free energy wins. At zero
    probe field the magnetization is reported non-negative.
    """
    if not p.t > 0:
        raise DomainError(f"Finite-temperature solve needs t > 0 (use zero_t_solve): {p.t}")
    q = q or Quadrature()
    cfg = cfg or SolverConfig()

    # any root has |m| <= 1/2, so the residual needs no domain guard
    def residual(x: np.ndarray) -> np.ndarray:
        return equilibrium_residuals(p, float(x[0]), float(x[1]), q)

    solutions: List[StonerState] = []
    last_error: Optional[NumericsError] = None
    for branch, guess in _seeds(p, seed):
        try:
            m, mu = solve_system(residual, guess, cfg)
        except NumericsError as exc:
            logger.debug("u=%g t=%g: %s seed %s failed: %s", p.u, p.t, branch, guess, exc)
            last_error = exc
            continue
        if p.field == 0.0:
            m = abs(m)
        norm = float(np.max(np.abs(residual(np.array([m, mu])))))
        solutions.append(StonerState(m=min(m, 0.5), mu=mu, branch=branch, residual=norm))

    if not solutions:
        if isinstance(last_error, ConvergenceError):
            raise last_error
        raise ConvergenceError(
            f"No branch converged at u={p.u}, t={p.t}", np.array([0.0, 0.0]), float("inf")
        )

    paramagnetic = [s for s in solutions if s.branch == "paramagnetic"]
    reference = paramagnetic[0].m if paramagnetic else (0.0 if p.field == 0.0 else None)
    best: Optional[StonerState] = None
    best_energy = math.inf
    for state in solutions:
        if reference is not None and abs(state.m - reference) <= _SAME_BRANCH:
            state = StonerState(state.m, state.mu, True, "paramagnetic", state.residual)
        energy = free_energy(p, state, q)
        better = energy < best_energy - 1e-14 * max(1.0, abs(energy))
        tie_to_paramagnetic = (
            best is not None
            and abs(energy - best_energy) <= 1e-14 * max(1.0, abs(energy))
            and state.branch == "paramagnetic"
            and best.branch != "paramagnetic"
        )
        if better or tie_to_paramagnetic:
            best, best_energy = state, energy
    logger.debug("u=%g t=%g: %s branch, m=%.12g", p.u, p.t, best.branch, best.m)
    return best


def critical_coupling(t: float, q: Optional[Quadrature] = None) -> float:
    """u_c(t) from the linearized magnetization equation, u_c = 1 / int sqrt(eps) (-f')"""
    if not t > 0:
        raise DomainError(f"Critical coupling needs t > 0: {t}")
    q = q or Quadrature()

    def number(shifted_mu: float) -> float:
        def occupied(eps: np.ndarray) -> np.ndarray:
            return fermi((eps - shifted_mu) / t)

        return 1.5 * integrate_semi_infinite(
            occupied, "sqrt", max(shifted_mu, 0.0), q, t, [shifted_mu]
        ) - 1.0

    shifted = solve_bracketed(number, -60.0 * t - 1.0, 1.0 + t)

    def response(eps: np.ndarray) -> np.ndarray:
        x = (eps - shifted) / t
        return fermi(x) * fermi(-x) / t

    density = integrate_semi_infinite(response, "sqrt", max(shifted, 0.0), q, t, [shifted])
    return 1.0 / density


# ---------------------------------------------------------------------------
# fidelity


def _levels(alpha: Field, h: Field) -> np.ndarray:
    """Log Boltzmann weights of |0>, |up>, |down>, |up down> for e^{alpha n + h S^z}"""
    alpha, h = np.broadcast_arrays(np.asarray(alpha, dtype=float), np.asarray(h, dtype=float))
    return np.stack([np.zeros_like(alpha), alpha + 0.5 * h, alpha - 0.5 * h, 2.0 * alpha])


def commuting_log_fidelity(alpha_a: Field, h_a: Field, alpha_b: Field, h_b: Field) -> Field:
    """ln F of two per-mode states e^{alpha n + h S^z} / Z, from the level populations"""
    levels_a = _levels(alpha_a, h_a)
    levels_b = _levels(alpha_b, h_b)
    log_z_a = logsumexp(levels_a, axis=0)
    log_z_b = logsumexp(levels_b, axis=0)
    overlap = logsumexp(0.5 * (levels_a + levels_b), axis=0)
    return np.minimum(overlap - 0.5 * (log_z_a + log_z_b), 0.0)


def commuting_log_partition_ratio(
    alpha_a: Field, h_a: Field, alpha_b: Field, h_b: Field
) -> Field:
    """ln C = ln Z(mean exponent) - (ln Z_a + ln Z_b) / 2 from the closed-form traces"""
    mean = algebra.log_trace_exp_number_spin(
        0.5 * (alpha_a + alpha_b), SpinVector.along_z(0.5 * (h_a + h_b))
    )
    side_a = algebra.log_trace_exp_number_spin(alpha_a, SpinVector.along_z(h_a))
    side_b = algebra.log_trace_exp_number_spin(alpha_b, SpinVector.along_z(h_b))
    return np.minimum(mean - 0.5 * (side_a + side_b), 0.0)


def mode_log_fidelity(
    p: StonerParams, state_a: StonerState, state_b: StonerState, eps: Field
) -> Field:
    """ln F_k between the mode at eps in state_a (at p) and state_b (at p's neighbor)"""
    fa = fields(p, state_a)
    fb = fields(p.neighbor(), state_b)
    return commuting_log_fidelity(fa.alpha(eps), fa.h_z, fb.alpha(eps), fb.h_z)


def mode_log_partition_ratio(
    p: StonerParams, state_a: StonerState, state_b: StonerState, eps: Field
) -> Field:
    fa = fields(p, state_a)
    fb = fields(p.neighbor(), state_b)
    return commuting_log_partition_ratio(fa.alpha(eps), fa.h_z, fb.alpha(eps), fb.h_z)


def mode_generator(f: StonerFields, eps: float) -> np.ndarray:
    """Dense exponent alpha n + h_z S^z of one mode"""
    ops = algebra.build_mode_operators("stoner")
    return f.alpha(eps) * ops["n"] + algebra.operator_form(SpinVector.along_z(f.h_z), "stoner")


def _fidelity_integral(
    p: StonerParams,
    state_a: StonerState,
    state_b: StonerState,
    per_mode,
    q: Quadrature,
) -> float:
    neighbor = p.neighbor()
    edges = fermi_edges(p.u, state_a.m, state_a.mu, p.field) + fermi_edges(
        neighbor.u, state_b.m, state_b.mu, neighbor.field
    )
    width = max(p.t, neighbor.t)

    def integrand(eps: np.ndarray) -> np.ndarray:
        return per_mode(p, state_a, state_b, eps)

    return p.size * integrate_semi_infinite(integrand, "sqrt", max(edges), q, width, edges)


def total_fidelity(
    p: StonerParams,
    state_a: Optional[StonerState] = None,
    state_b: Optional[StonerState] = None,
    q: Optional[Quadrature] = None,
) -> Tuple[float, float]:
    """(F, C) between the equilibrium states at p and at its neighbor.

    ln F = size * int sqrt(eps) ln F(eps) d eps over the mode energies; C is the
    same integral over ln C(eps), computed through an independent route.
    """
    if p.dt == 0.0 and p.du == 0.0:
        return 1.0, 1.0
    q = q or Quadrature()
    if state_a is None:
        state_a = solve_equilibrium(p, q=q)
    if state_b is None:
        state_b = solve_equilibrium(p.neighbor(), seed=state_a, q=q)
    log_f = _fidelity_integral(p, state_a, state_b, mode_log_fidelity, q)
    log_c = _fidelity_integral(p, state_a, state_b, mode_log_partition_ratio, q)
    return math.exp(log_f), math.exp(log_c)


def uhlmann_deviation_max(
    p: StonerParams,
    state_a: StonerState,
    state_b: StonerState,
    eps_values: Iterable[float],
) -> float:
    """Largest ||U_ab - I|| over the probe modes; zero up to rounding for commuting states"""
    fa = fields(p, state_a)
    fb = fields(p.neighbor(), state_b)
    deviation = 0.0
    for eps in eps_values:
        rho_a = algebra.gibbs_state(mode_generator(fa, eps))
        rho_b = algebra.gibbs_state(mode_generator(fb, eps))
        polar = algebra.polar_unitary(rho_a, rho_b)
        deviation = max(deviation, algebra.uhlmann_deviation(polar.unitary))
    return deviation


def probe_energies(p: StonerParams, state: StonerState) -> List[float]:
    """Mode energies at and around the Fermi level used for the Uhlmann check"""
    centre = state.mu - 2.0 * p.u / 3.0
    return [e for e in (centre - 2.0 * p.t, centre, centre + 2.0 * p.t) if e >= 0.0]


# ---------------------------------------------------------------------------
# susceptibility


def susceptibility_fd(
    p: StonerParams,
    h: float = 1e-4,
    state: Optional[StonerState] = None,
    q: Optional[Quadrature] = None,
) -> float:
    """dm/dh_ext at zero field, per electron, by a central difference.

    Free electrons at t -> 0 give 3/8; interactions enhance it by 1/(1 - u/u_c).
    """
    if h <= 0:
        raise DomainError(f"Probe field must be positive: {h}")
    q = q or Quadrature()
    base = p.with_field(0.0)
    state = state or solve_equilibrium(base, q=q)
    if state.branch != "paramagnetic":
        raise DomainError(f"Susceptibility is defined on the paramagnetic side: u={p.u}, t={p.t}")
    plus = solve_equilibrium(base.with_field(h), seed=state, q=q)
    minus = solve_equilibrium(base.with_field(-h), seed=state, q=q)
    return (plus.m - minus.m) / (2.0 * h)


def fermi_rule(
    p: StonerParams, state: StonerState, order: int = 16, margin: float = 40.0
) -> Tuple[np.ndarray, np.ndarray]:
    """Fixed rule (eps nodes, weights) for int sqrt(eps) g(eps) d eps around the Fermi level.

    Panels are a quarter of t wide in eps, so the rule resolves Fermi functions
    of every nearby state in the same way.
    """
    cutoff = max(fermi_edges(p.u, state.m, state.mu, p.field)) + margin * p.t
    count = max(64, int(math.ceil(4.0 * cutoff / p.t)))
    s_breaks = np.sqrt(np.linspace(0.0, cutoff, count + 1))
    s, w = gauss_legendre_rule(s_breaks, order)
    return s * s, 2.0 * s * s * w


def log_canonical_partition(
    p: StonerParams, state: StonerState, rule: Tuple[np.ndarray, np.ndarray]
) -> float:
    """ln Z / N of the self-consistent state at fixed particle number"""
    nodes, weights = rule
    e_up, e_down = dispersions(p.u, state.m, state.mu, nodes, p.field)
    grand = weights @ (algebra.softplus(-e_up / p.t) + algebra.softplus(-e_down / p.t))
    constant = 4.0 * p.u / 3.0 * (0.25 - state.m**2)
    return float(0.75 * grand + (constant - state.mu) / p.t)


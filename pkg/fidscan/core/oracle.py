"""Randomized equivalence suites: closed forms against dense 4x4 computations"""

import logging
from typing import Callable, Dict, List, Optional

import numpy as np

from . import algebra, bcs, stoner
from .models import ModePoint, OracleSuiteResult, SpinVector, StonerFields

logger = logging.getLogger(__name__)

ORACLE_TOLERANCE = 1e-10
DEFAULT_SEED = 20240917
DEFAULT_DRAWS = 1000


def _random_vector(rng: np.random.Generator, scale: float = 3.0) -> SpinVector:
    x, y, z = rng.normal(scale=scale, size=3)
    return SpinVector.from_components(x, y, z)


def _relative(value: float, reference: float) -> float:
    return abs(value - reference) / max(abs(reference), 1e-300)


def _norm_relative(value: np.ndarray, reference: np.ndarray) -> float:
    return float(np.linalg.norm(value - reference) / np.linalg.norm(reference))


def _dense_trace(generator: np.ndarray) -> float:
    return float(np.real(np.trace(algebra.dense_exp(generator))))


def algebra_traces(rng: np.random.Generator, draws: int) -> float:
    """Trace formulas and cosh c versus traces of dense exponentials"""
    ops = algebra.build_mode_operators("stoner")
    worst = 0.0
    for _ in range(draws):
        h, a, b = _random_vector(rng), _random_vector(rng), _random_vector(rng)
        alpha = rng.uniform(-3.0, 3.0)
        spin = algebra.operator_form(h, "stoner")
        worst = max(worst, _relative(algebra.trace_exp_spin(h), _dense_trace(spin)))
        worst = max(
            worst,
            _relative(
                algebra.trace_exp_number_spin(alpha, h),
                _dense_trace(alpha * ops["n"] + spin),
            ),
        )
        nambu_a = algebra.operator_form(a, "bcs")
        nambu_b = algebra.operator_form(b, "bcs")
        worst = max(worst, _relative(algebra.trace_exp_nambu(a), _dense_trace(nambu_a)))
        product = algebra.dense_exp(nambu_a) @ algebra.dense_exp(nambu_b)
        dense_cosh_c = 0.5 * float(np.real(np.trace(product))) - 1.0
        worst = max(worst, _relative(algebra.cosh_c(a, b), dense_cosh_c))
    return worst


def _commutator(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return x @ y - y @ x


def _anticommutator(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return x @ y + y @ x


def _identity_deviations(model: str) -> List[float]:
    ops = algebra.build_mode_operators(model)
    prefix, projector = ("s", "i_s") if model == "stoner" else ("t", "i_t")
    zero, plus, minus = (ops[f"{prefix}_{name}"] for name in ("zero", "plus", "minus"))
    proj = ops[projector]
    casimir = zero @ zero + 0.5 * (plus @ minus + minus @ plus)
    checks = [
        _commutator(zero, plus) - plus,
        _commutator(zero, minus) + minus,
        _anticommutator(plus, minus) - proj,
        _anticommutator(zero, plus),
        _anticommutator(zero, minus),
        casimir - 0.75 * proj,
        proj @ proj - proj,
    ]
    deviations = [float(np.max(np.abs(check))) for check in checks]
    deviations.append(abs(np.trace(proj) - 2.0))
    deviations.append(abs(np.trace(zero)))
    if model == "bcs":
        deviations.append(float(np.max(np.abs(ops["z_t"] - (ops["identity"] - proj)))))
    else:
        deviations.append(abs(np.trace(ops["n"]) - 4.0))
        deviations.append(abs(np.trace(ops["n"] @ ops["n"]) - 6.0))
    return deviations


def algebra_identities(rng: np.random.Generator, draws: int) -> float:
    """Operator identities, e^{alpha n} and e^{h.S} closed forms, fidelity of product states"""
    worst = max(_identity_deviations("stoner") + _identity_deviations("bcs"))
    ops = algebra.build_mode_operators("stoner")
    n, identity, i_s = ops["n"], ops["identity"], ops["i_s"]
    for _ in range(draws):
        alpha = rng.uniform(-20.0, 20.0)
        v = 0.5 * np.expm1(alpha) ** 2
        u = np.expm1(alpha) - v
        closed = identity + u * n + v * n @ n
        worst = max(worst, _norm_relative(closed, algebra.dense_exp(alpha * n)))

        h = _random_vector(rng)
        norm = float(algebra.physical_norm(h))
        spin = algebra.operator_form(h, "stoner")
        closed = (
            (identity - i_s)
            + np.cosh(0.5 * norm) * i_s
            + 2.0 * np.sinh(0.5 * norm) * spin / norm
        )
        worst = max(worst, _norm_relative(closed, algebra.dense_exp(spin)))

    for _ in range(max(1, draws // 10)):
        rho = algebra.gibbs_state(algebra.operator_form(_random_vector(rng, 1.0), "bcs"))
        other = algebra.gibbs_state(algebra.operator_form(_random_vector(rng, 1.0), "bcs"))
        sigma = algebra.gibbs_state(algebra.operator_form(_random_vector(rng, 1.0), "stoner"))
        extended = algebra.dense_fidelity(np.kron(rho, sigma), np.kron(other, sigma))
        worst = max(worst, abs(extended - algebra.dense_fidelity(rho, other)))
    return worst


def stoner_modes(rng: np.random.Generator, draws: int) -> float:
    """Per-mode Stoner F and C versus dense fidelity and dense partition ratio"""
    worst = 0.0
    for _ in range(draws):
        t = rng.uniform(0.02, 0.6)
        u = rng.uniform(0.0, 2.0)
        mu = rng.uniform(0.5, 2.0)
        fa = StonerFields(beta=1.0 / t, mu=mu, u=u, m=rng.uniform(0.0, 0.5))
        fb = StonerFields(
            beta=1.0 / (t + rng.uniform(0.0, 0.01)),
            mu=mu + rng.uniform(-0.01, 0.01),
            u=u + rng.uniform(0.0, 0.01),
            m=rng.uniform(0.0, 0.5),
        )
        eps = rng.uniform(0.0, mu + 2.0)
        args = (fa.alpha(eps), fa.h_z, fb.alpha(eps), fb.h_z)
        gen_a = stoner.mode_generator(fa, eps)
        gen_b = stoner.mode_generator(fb, eps)
        dense = algebra.dense_fidelity(algebra.gibbs_state(gen_a), algebra.gibbs_state(gen_b))
        worst = max(worst, abs(float(np.exp(stoner.commuting_log_fidelity(*args))) - dense))
        ratio = algebra.dense_partition_ratio(gen_a, gen_b)
        worst = max(
            worst, abs(float(np.exp(stoner.commuting_log_partition_ratio(*args))) - ratio)
        )
    return worst


def _random_mode_pair(rng: np.random.Generator) -> tuple:
    eps = rng.uniform(-1.0, 1.0)
    points = []
    for _ in range(2):
        gap = rng.uniform(0.0, 1.0) * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
        points.append(ModePoint(t=1.0 / rng.uniform(0.5, 8.0), gap=gap, eps=eps))
    return points[0], points[1]


def bcs_modes(rng: np.random.Generator, draws: int) -> float:
    """Per-mode BCS F, C and H versus dense fidelity, partition ratio and overlap"""
    worst = 0.0
    for _ in range(draws):
        pa, pb = _random_mode_pair(rng)
        log_f, log_c, log_h = bcs.mode_log_triple(pa, pb)
        gen_a, gen_b = bcs.mode_generator(pa), bcs.mode_generator(pb)
        rho_a, rho_b = algebra.gibbs_state(gen_a), algebra.gibbs_state(gen_b)
        worst = max(
            worst,
            abs(float(np.exp(log_f)) - algebra.dense_fidelity(rho_a, rho_b)),
            abs(float(np.exp(log_c)) - algebra.dense_partition_ratio(gen_a, gen_b)),
            abs(float(np.exp(log_h)) - algebra.dense_overlap(rho_a, rho_b)),
        )
    return worst


def uhlmann_identity(rng: np.random.Generator, draws: int) -> float:
    """H - F = Tr[|sqrt(rho_a) sqrt(rho_b)| (U - I)] on random BCS mode pairs"""
    worst = 0.0
    for _ in range(draws):
        pa, pb = _random_mode_pair(rng)
        worst = max(worst, bcs.mode_uhlmann(pa, pb).identity_residual)
    return worst


SUITES: Dict[str, Callable[[np.random.Generator, int], float]] = {
    "algebra-traces": algebra_traces,
    "algebra-identities": algebra_identities,
    "stoner-modes": stoner_modes,
    "bcs-modes": bcs_modes,
    "uhlmann-identity": uhlmann_identity,
}


def run_oracle_suites(
    seed: int = DEFAULT_SEED,
    draws: int = DEFAULT_DRAWS,
    names: Optional[List[str]] = None,
    tolerance: float = ORACLE_TOLERANCE,
) -> List[OracleSuiteResult]:
    """Run the named suites (all by default), each from its own seeded generator"""
    if draws < 1:
        raise ValueError(f"Draw count must be at least 1: {draws}")
    selected = names or list(SUITES)
    unknown = [name for name in selected if name not in SUITES]
    if unknown:
        raise ValueError(f"Unknown oracle suites: {', '.join(unknown)}")
    results = []
    for name in selected:
        rng = np.random.default_rng([seed, list(SUITES).index(name)])
        deviation = SUITES[name](rng, draws)
        logger.info("oracle suite %s: max deviation %.3e", name, deviation)
        results.append(OracleSuiteResult(name, draws, float(deviation), tolerance))
    return results

"""su(2) closed forms for one fermion mode and the dense 4x4 operator oracle.

Every mode (k up, k down, or k up, -k down for pairing) spans the Fock space
(|0>, |up>, |down>, |up down>) in that order, with |up down> = c+_up c+_down |0>.
The spin triple S and the Nambu triple T act on complementary blocks:
S on the singly occupied states, T on the empty and doubly occupied ones.

Closed forms accept scalars or numpy arrays and are evaluated in log space
where overflow is possible.
"""

import logging
import math
from typing import Dict, Optional, Sequence

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from .models import Field, PolarDecomposition, SpinVector

logger = logging.getLogger(__name__)

FOCK_BASIS = ("0", "up", "down", "updown")
PAIR_BLOCK = (0, 3)
SPIN_BLOCK = (1, 2)

_LOG2 = math.log(2.0)
_HERMITIAN_TOLERANCE = 1e-12
_CLAMP_TOLERANCE = 1e-12
_NEGATIVE_EIGENVALUE_LIMIT = -1e-9
_OVERFLOW_LOG = 700.0


class NonPhysicalError(ValueError):
    """Raised for complex norms, non-Hermitian generators or negative states"""

    pass


# ---------------------------------------------------------------------------
# scalar helpers


def log_cosh(x: Field) -> Field:
    x = np.abs(x)
    return x + np.log1p(np.exp(-2.0 * x)) - _LOG2


def log_sinh(x: Field) -> Field:
    """log sinh(x) for x >= 0; -inf at 0"""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return x + np.log(-np.expm1(-2.0 * x)) - _LOG2


def log_one_plus_cosh(x: Field) -> Field:
    """log(1 + cosh x) = log 2 + 2 log cosh(x/2)"""
    return _LOG2 + 2.0 * log_cosh(0.5 * np.asarray(x, dtype=float))


def softplus(x: Field) -> Field:
    return np.logaddexp(0.0, x)


# ---------------------------------------------------------------------------
# closed forms


def vec_dot(a: SpinVector, b: SpinVector) -> Field:
    """Scalar product 1/2 (a+ b- + a- b+) + a0 b0"""
    return 0.5 * (a.h_plus * b.h_minus + a.h_minus * b.h_plus) + a.h_zero * b.h_zero


def physical_norm(h: SpinVector) -> Field:
    """Euclidean norm of a physical vector; rejects complex norm^2"""
    squared = np.asarray(h.norm_squared())
    scale = 1.0 + np.abs(squared)
    if np.any(np.abs(np.imag(squared)) > _HERMITIAN_TOLERANCE * scale):
        raise NonPhysicalError(f"Vector has a complex norm^2: {squared}")
    return np.sqrt(np.clip(np.real(squared), 0.0, None))


def log_trace_exp_spin(h: SpinVector) -> Field:
    return _LOG2 + log_one_plus_cosh(0.5 * physical_norm(h))


def trace_exp_spin(h: SpinVector) -> Field:
    """Tr e^{h.S} = 2 (1 + cosh(|h|/2))"""
    return _checked_exp(log_trace_exp_spin(h), "log_trace_exp_spin")


def log_trace_exp_number_spin(alpha: Field, h: SpinVector) -> Field:
    half = 0.5 * physical_norm(h)
    return softplus(alpha + half) + softplus(alpha - half)


def trace_exp_number_spin(alpha: Field, h: SpinVector) -> Field:
    """Tr e^{alpha n + h.S} = (1 + e^{alpha + |h|/2}) (1 + e^{alpha - |h|/2})"""
    return _checked_exp(
        log_trace_exp_number_spin(alpha, h), "log_trace_exp_number_spin"
    )


def log_trace_exp_nambu(a: SpinVector) -> Field:
    return log_trace_exp_spin(a)


def trace_exp_nambu(a: SpinVector) -> Field:
    """Tr e^{a.T} = 2 (1 + cosh(|a|/2))"""
    return _checked_exp(log_trace_exp_nambu(a), "log_trace_exp_nambu")


def _one_plus_cosine(a: SpinVector, b: SpinVector, na: Field, nb: Field) -> Field:
    """1 + cos(angle between a and b), as |a/|a| + b/|b||^2 / 2"""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_a = np.where(na > 0, 1.0 / np.where(na > 0, na, 1.0), 0.0)
        inv_b = np.where(nb > 0, 1.0 / np.where(nb > 0, nb, 1.0), 0.0)
    unit_sum = a.scaled(inv_a) + b.scaled(inv_b)
    return 0.5 * np.real(unit_sum.norm_squared())


def log_cosh_c(a: SpinVector, b: SpinVector) -> Field:
    """log cosh c, where Tr[e^{a.T} e^{b.T}] = 2 (1 + cosh c).

    Uses cosh c = cosh(A - B) + sinh A sinh B (1 + cos theta) with A = |a|/2,
    B = |b|/2, which stays accurate for nearly antiparallel vectors.
    """
    na = physical_norm(a)
    nb = physical_norm(b)
    half_a = 0.5 * na
    half_b = 0.5 * nb
    opc = _one_plus_cosine(a, b, na, nb)
    with np.errstate(divide="ignore"):
        rotated = log_sinh(half_a) + log_sinh(half_b) + np.log(opc)
    return np.logaddexp(log_cosh(half_a - half_b), rotated)


def cosh_c(a: SpinVector, b: SpinVector) -> Field:
    """cosh(a/2) cosh(b/2) + sinh(a/2) sinh(b/2) (a.b)/(ab)"""
    return _checked_exp(log_cosh_c(a, b), "log_cosh_c")


def _checked_exp(value: Field, companion: str) -> Field:
    if np.any(np.asarray(value) > _OVERFLOW_LOG):
        raise OverflowError(f"Trace overflows double precision; use {companion}")
    result = np.exp(value)
    return float(result) if np.ndim(result) == 0 else result


# ---------------------------------------------------------------------------
# dense oracle


def _creation_operators() -> Dict[str, np.ndarray]:
    up = np.zeros((4, 4), dtype=complex)
    up[1, 0] = 1.0
    up[3, 2] = 1.0
    down = np.zeros((4, 4), dtype=complex)
    down[2, 0] = 1.0
    down[3, 1] = -1.0
    return {"up": up, "down": down}


def build_mode_operators(model: str) -> Dict[str, np.ndarray]:
    """Dense operators of one mode, keyed by name.

    stoner: n_up, n_down, n, s_zero, s_plus, s_minus, i_s
    bcs:    n_up, n_down, n, t_zero, t_plus, t_minus, i_t, z_t
    Both include the identity under "identity".
    """
    if model not in ("stoner", "bcs"):
        raise ValueError(f"Invalid model: {model}")
    create = _creation_operators()
    up, down = create["up"], create["down"]
    identity = np.eye(4, dtype=complex)
    n_up = up @ up.conj().T
    n_down = down @ down.conj().T
    n = n_up + n_down
    ops = {"identity": identity, "n_up": n_up, "n_down": n_down, "n": n}
    if model == "stoner":
        s_plus = up @ down.conj().T
        ops.update(
            s_zero=0.5 * (n_up - n_down),
            s_plus=s_plus,
            s_minus=s_plus.conj().T,
            i_s=n - 2.0 * n_up @ n_down,
        )
    else:
        t_plus = up @ down
        i_t = identity - n + 2.0 * n_up @ n_down
        ops.update(
            t_zero=0.5 * (n - identity),
            t_plus=t_plus,
            t_minus=t_plus.conj().T,
            i_t=i_t,
            z_t=identity - i_t,
        )
    return ops


def operator_form(h: SpinVector, model: str) -> np.ndarray:
    """Dense 1/2 (h+ O- + h- O+) + h0 O0 over the spin (stoner) or Nambu (bcs) triple"""
    ops = build_mode_operators(model)
    prefix = "s" if model == "stoner" else "t"
    return (
        0.5 * (complex(h.h_plus) * ops[f"{prefix}_minus"]
               + complex(h.h_minus) * ops[f"{prefix}_plus"])
        + complex(h.h_zero) * ops[f"{prefix}_zero"]
    )


def _require_hermitian(matrix: np.ndarray) -> None:
    scale = max(1.0, float(np.max(np.abs(matrix))))
    if not np.allclose(matrix, matrix.conj().T, atol=_HERMITIAN_TOLERANCE * scale, rtol=0):
        raise NonPhysicalError("Operator is not Hermitian")


def dense_exp(h: np.ndarray) -> np.ndarray:
    """Matrix exponential of a Hermitian operator via eigendecomposition"""
    _require_hermitian(h)
    values, vectors = linalg.eigh(h)
    return (vectors * np.exp(values)) @ vectors.conj().T


def gibbs_state(generator: np.ndarray) -> np.ndarray:
    """Normalized e^{G} / Tr e^{G}, shifted to avoid overflow"""
    _require_hermitian(generator)
    values, vectors = linalg.eigh(generator)
    weights = np.exp(values - values.max())
    weights /= weights.sum()
    return (vectors * weights) @ vectors.conj().T


def dense_sqrt(rho: np.ndarray) -> np.ndarray:
    """Square root of a Hermitian positive semidefinite operator"""
    _require_hermitian(rho)
    values, vectors = linalg.eigh(rho)
    if values.min() < _NEGATIVE_EIGENVALUE_LIMIT:
        raise NonPhysicalError(f"Negative eigenvalue {values.min()} in density operator")
    if values.min() < -_CLAMP_TOLERANCE:
        logger.debug("Clamping eigenvalue %.3e to zero", values.min())
    values = np.clip(values, 0.0, None)
    return (vectors * np.sqrt(values)) @ vectors.conj().T


def dense_fidelity(rho_a: np.ndarray, rho_b: np.ndarray) -> float:
    """Tr sqrt(sqrt(rho_a) rho_b sqrt(rho_a)), as the trace norm of sqrt(rho_a) sqrt(rho_b)"""
    product = dense_sqrt(rho_a) @ dense_sqrt(rho_b)
    return float(np.sum(linalg.svdvals(product)))


def dense_overlap(rho_a: np.ndarray, rho_b: np.ndarray) -> float:
    """Tr[sqrt(rho_a) sqrt(rho_b)]"""
    return float(np.real(np.trace(dense_sqrt(rho_a) @ dense_sqrt(rho_b))))


def dense_partition_ratio(generator_a: np.ndarray, generator_b: np.ndarray) -> float:
    """Tr e^{(G_a + G_b)/2} / sqrt(Tr e^{G_a} Tr e^{G_b})"""
    mean = 0.5 * (generator_a + generator_b)
    for matrix in (generator_a, generator_b):
        _require_hermitian(matrix)
    log_mean = logsumexp(linalg.eigvalsh(mean))
    log_a = logsumexp(linalg.eigvalsh(generator_a))
    log_b = logsumexp(linalg.eigvalsh(generator_b))
    return float(np.exp(log_mean - 0.5 * (log_a + log_b)))


def polar_unitary(rho_a: np.ndarray, rho_b: np.ndarray) -> PolarDecomposition:
    """Uhlmann connection of two density operators.

    sqrt(rho_a) sqrt(rho_b) = |sqrt(rho_a) sqrt(rho_b)| V; the connection is
    U = V^dagger, so that Tr[sqrt(rho_a) sqrt(rho_b) U] is the fidelity. A
    rank-deficient product still yields the deterministic SVD completion and
    is flagged as degenerate.
    """
    product = dense_sqrt(rho_a) @ dense_sqrt(rho_b)
    singular = linalg.svdvals(product)
    degenerate = bool(singular.min() <= 1e-14 * max(singular.max(), 1e-300))
    if degenerate:
        logger.debug("Rank-deficient product in polar decomposition: %s", singular)
    v_factor, modulus = linalg.polar(product, side="left")
    return PolarDecomposition(
        unitary=v_factor.conj().T, modulus=modulus, degenerate=degenerate
    )


def uhlmann_deviation(
    unitary: np.ndarray, block: Optional[Sequence[int]] = None
) -> float:
    """Operator 2-norm of U - I, optionally restricted to a block of basis states"""
    difference = unitary - np.eye(unitary.shape[0])
    if block is not None:
        difference = difference[np.ix_(block, block)]
    return float(np.linalg.norm(difference, 2))


def trace_identity_residual(
    rho_a: np.ndarray, rho_b: np.ndarray, polar: Optional[PolarDecomposition] = None
) -> float:
    """|(H - F) - Tr[|sqrt(rho_a) sqrt(rho_b)| (U - I)]|"""
    polar = polar or polar_unitary(rho_a, rho_b)
    overlap = dense_overlap(rho_a, rho_b)
    fidelity = dense_fidelity(rho_a, rho_b)
    identity = np.eye(polar.unitary.shape[0])
    transported = np.real(np.trace(polar.modulus @ (polar.unitary - identity)))
    return float(abs((overlap - fidelity) - transported))

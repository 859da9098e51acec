"""Data models for parameter points, mean-field states and sweep results"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

MODELS = ("stoner", "bcs")
BRANCHES = ("paramagnetic", "magnetic")

# Scalars or broadcastable arrays; the closed forms are evaluated on whole mode grids.
Field = Union[complex, float, np.ndarray]


class DomainError(ValueError):
    """Raised when a model operation is called outside its domain"""

    pass


MODEL_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "stoner": {
        "t": (0.01, 0.6, 200),
        "coupling": (0.6, 1.6, 200),
        "dcoupling": 2e-3,
        "size": 750.0,
    },
    "bcs": {
        "t": (0.005, 0.12, 200),
        "coupling": (0.05, 0.5, 200),
        "dcoupling": 1e-3,
        "size": 500.0,
    },
}


@dataclass(eq=False)
class SpinVector:
    """Field vector (h+, h-, h0) multiplying an su(2) triple.

    The operator it stands for is 1/2 (h+ O- + h- O+) + h0 O0, with O either
    the spin triple or the Nambu triple of one mode. Components may be numpy
    arrays of a common shape, in which case every operation acts elementwise.
    """

    h_plus: Field
    h_minus: Field
    h_zero: Field

    @classmethod
    def from_components(cls, x: Field, y: Field, z: Field) -> "SpinVector":
        """Build a physical vector from Cartesian components"""
        return cls(x + 1j * np.asarray(y), x - 1j * np.asarray(y), z)

    @classmethod
    def along_z(cls, h_zero: Field) -> "SpinVector":
        return cls(0.0, 0.0, h_zero)

    @classmethod
    def nambu(cls, beta: Field, gap: Field, eps: Field) -> "SpinVector":
        """Nambu field (2 beta conj(gap), 2 beta gap, -2 beta eps) of one BCS mode"""
        gap = np.asarray(gap, dtype=complex)
        return cls(2.0 * beta * np.conj(gap), 2.0 * beta * gap, -2.0 * beta * eps)

    def norm_squared(self) -> Field:
        """h0^2 + h+ h-; real and non-negative for physical vectors"""
        return self.h_zero * self.h_zero + self.h_plus * self.h_minus

    def scaled(self, factor: Field) -> "SpinVector":
        return SpinVector(
            factor * self.h_plus, factor * self.h_minus, factor * self.h_zero
        )

    def __add__(self, other: "SpinVector") -> "SpinVector":
        return SpinVector(
            self.h_plus + other.h_plus,
            self.h_minus + other.h_minus,
            self.h_zero + other.h_zero,
        )

    def components(self) -> Tuple[Field, Field, Field]:
        """Cartesian (x, y, z) components"""
        x = 0.5 * (self.h_plus + self.h_minus)
        y = -0.5j * (self.h_plus - self.h_minus)
        return x, y, self.h_zero

    def is_physical(self, tolerance: float = 1e-12) -> bool:
        """True when h- is the conjugate of h+ and h0 is real"""
        scale = 1.0 + np.max(np.abs(self.h_plus)) + np.max(np.abs(self.h_zero))
        mismatch = np.max(np.abs(np.conj(self.h_plus) - self.h_minus))
        imaginary = np.max(np.abs(np.imag(self.h_zero)))
        return bool(mismatch <= tolerance * scale and imaginary <= tolerance * scale)


@dataclass(frozen=True)
class ParameterPoint:
    """A point q = (t, coupling) of the phase plane and the offset to its neighbor"""

    t: float
    coupling: float
    dt: float = 0.0
    dcoupling: float = 0.0

    def __post_init__(self) -> None:
        if self.t < 0:
            raise ValueError(f"Temperature must be non-negative: {self.t}")
        if self.coupling < 0:
            raise ValueError(f"Coupling must be non-negative: {self.coupling}")

    def neighbor(self) -> "ParameterPoint":
        return ParameterPoint(self.t + self.dt, self.coupling + self.dcoupling)

    def same_location(self, other: "ParameterPoint") -> bool:
        return self.t == other.t and self.coupling == other.coupling


@dataclass(frozen=True)
class Quadrature:
    """Controls for adaptive Gauss-Kronrod integration.

    ``atol`` is an absolute floor in the rescaled energy units, where the
    uncancelled parts of every integral are of order one. Differences of
    occupations near m = 0 or log-fidelities near 1 are many orders smaller
    than the roundoff of their terms and converge to this floor.
    """

    panels: int = 8
    rtol: float = 1e-12
    atol: float = 1e-14
    tail: float = 40.0
    max_subdivisions: int = 4000

    def __post_init__(self) -> None:
        if self.panels < 1:
            raise ValueError(f"Panel count must be at least 1: {self.panels}")
        if not 1e-14 < self.rtol < 1e-2:
            raise ValueError(f"Relative tolerance must lie in (1e-14, 1e-2): {self.rtol}")
        if not 0 <= self.atol < 1e-6:
            raise ValueError(f"Absolute tolerance must lie in [0, 1e-6): {self.atol}")
        if self.tail < 10:
            raise ValueError(f"Tail cutoff multiplier must be at least 10: {self.tail}")
        if self.max_subdivisions < self.panels:
            raise ValueError(
                f"Subdivision limit {self.max_subdivisions} is below the panel count"
            )


@dataclass(frozen=True)
class SolverConfig:
    """Controls for the nonlinear and bracketed root finders"""

    max_iterations: int = 100
    step_tolerance: float = 1e-13
    residual_tolerance: float = 1e-10
    damping: Tuple[float, float] = (1.0 / 64.0, 1.0)
    fd_step: float = math.sqrt(np.finfo(float).eps)

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError(f"Max iterations must be at least 1: {self.max_iterations}")
        for name in ("step_tolerance", "residual_tolerance", "fd_step"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive: {getattr(self, name)}")
        low, high = self.damping
        if not 0 < low <= high <= 1:
            raise ValueError(f"Damping range must satisfy 0 < low <= high <= 1: {self.damping}")


@dataclass(frozen=True)
class StonerParams:
    """Stoner-Hubbard point in rescaled units (energies and t in units of the Fermi energy)"""

    u: float
    t: float
    size: float = 750.0
    dt: float = 0.0
    du: float = 0.0
    field: float = 0.0

    def __post_init__(self) -> None:
        if self.u < 0:
            raise ValueError(f"Coupling u must be non-negative: {self.u}")
        if self.t < 0:
            raise ValueError(f"Temperature must be non-negative: {self.t}")
        if self.size <= 0:
            raise ValueError(f"System size must be positive: {self.size}")
        if abs(self.du) > 0.1 or abs(self.dt) > 0.1:
            raise ValueError(f"Offsets must be small: dt={self.dt}, du={self.du}")

    @property
    def beta(self) -> float:
        return 1.0 / self.t

    @property
    def electrons(self) -> float:
        """N, with size n = 3N/4"""
        return 4.0 * self.size / 3.0

    def neighbor(self) -> "StonerParams":
        return StonerParams(
            u=self.u + self.du, t=self.t + self.dt, size=self.size, field=self.field
        )

    def with_field(self, value: float) -> "StonerParams":
        return StonerParams(
            u=self.u, t=self.t, size=self.size, dt=self.dt, du=self.du, field=value
        )


@dataclass(frozen=True)
class FermiMomenta:
    """Zero-temperature Fermi momenta in units of the paramagnetic k_F"""

    x: float
    y: float

    def __post_init__(self) -> None:
        if self.x < 0 or self.y < 0:
            raise ValueError(f"Fermi momenta must be non-negative: ({self.x}, {self.y})")
        if abs(self.x**3 + self.y**3 - 2.0) > 1e-8:
            raise ValueError(f"Fermi momenta violate x^3 + y^3 = 2: ({self.x}, {self.y})")

    @property
    def magnetization(self) -> float:
        return (self.x**3 - self.y**3) / 4.0


@dataclass(frozen=True)
class StonerState:
    """Self-consistent magnetization per electron and chemical potential"""

    m: float
    mu: float
    converged: bool = True
    branch: str = "paramagnetic"
    residual: float = 0.0

    def __post_init__(self) -> None:
        if abs(self.m) > 0.5 + 1e-12:
            raise ValueError(f"Magnetization per electron must lie in [-1/2, 1/2]: {self.m}")
        if self.branch not in BRANCHES:
            raise ValueError(f"Invalid branch: {self.branch}")

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "mu": self.mu,
            "converged": self.converged,
            "branch": self.branch,
            "residual": self.residual,
        }


@dataclass(frozen=True)
class StonerFields:
    """Per-mode exponents alpha(eps) n + h_z S^z of a Stoner Gibbs state"""

    beta: float
    mu: float
    u: float
    m: float
    field: float = 0.0

    def alpha(self, eps: Field) -> Field:
        """alpha = -beta (eps - mu + U N / 2V), with U N / 2V = 2u/3"""
        return -self.beta * (eps - self.mu + 2.0 * self.u / 3.0)

    @property
    def h_z(self) -> float:
        """h_z = 2 beta U M / V + beta h_ext, with 2 U M / V = 8 u m / 3"""
        return self.beta * (8.0 * self.u * self.m / 3.0 + self.field)


@dataclass(frozen=True)
class BcsParams:
    """BCS point in rescaled units (energies and t in units of the Debye energy)"""

    v: float
    t: float
    nu: float = 500.0
    dt: float = 0.0
    dv: float = 0.0

    def __post_init__(self) -> None:
        if self.v < 0:
            raise ValueError(f"Coupling v must be non-negative: {self.v}")
        if self.t < 0:
            raise ValueError(f"Temperature must be non-negative: {self.t}")
        if self.nu <= 0:
            raise ValueError(f"Mode density must be positive: {self.nu}")

    def neighbor(self) -> "BcsParams":
        return BcsParams(v=self.v + self.dv, t=self.t + self.dt, nu=self.nu)


@dataclass(frozen=True)
class BcsState:
    """Solution of the gap equation, gap in units of the Debye energy"""

    gap: float
    converged: bool = True
    residual: float = 0.0

    def __post_init__(self) -> None:
        if self.gap < 0:
            raise ValueError(f"Gap must be non-negative: {self.gap}")


@dataclass(frozen=True)
class ModePoint:
    """One BCS mode (or an array of modes sharing t and gap) at one parameter point"""

    t: float
    gap: complex
    eps: Field

    def __post_init__(self) -> None:
        if not self.t > 0:
            raise ValueError(f"Mode temperature must be positive: {self.t}")

    @property
    def beta(self) -> float:
        return 1.0 / self.t


@dataclass(frozen=True)
class ModeTriple:
    f: float
    c: float
    h: float
    uhl_dev: float


@dataclass(frozen=True)
class PolarDecomposition:
    """Left polar form A = modulus @ V, with the Uhlmann unitary U = V^dagger"""

    unitary: np.ndarray
    modulus: np.ndarray
    degenerate: bool = False


@dataclass(frozen=True)
class UhlmannSample:
    eps: float
    uhl_dev: float
    identity_residual: float


@dataclass
class SweepSpec:
    """Grid definition for a sweep over the (t, coupling) plane"""

    model: str
    t_range: Tuple[float, float, int]
    coupling_range: Tuple[float, float, int]
    dt: float = 0.0
    dcoupling: float = 0.0
    size: Optional[float] = None
    threshold: float = 1e-6
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ValueError(f"Invalid model: {self.model}")
        for name, (low, high, count) in (
            ("t", self.t_range),
            ("coupling", self.coupling_range),
        ):
            if count < 2:
                raise ValueError(f"{name} range needs at least 2 points: {count}")
            if not high > low:
                raise ValueError(f"{name} range must have positive length: {low}:{high}")
        if self.t_range[0] <= 0:
            raise ValueError(f"Sweep temperatures must be positive: {self.t_range[0]}")
        if self.coupling_range[0] < 0:
            raise ValueError(f"Sweep couplings must be non-negative: {self.coupling_range[0]}")
        if self.dt == 0.0 and self.dcoupling == 0.0:
            raise ValueError("At least one of the offsets dt, dcoupling must be nonzero")
        if abs(self.dt) > 0.1 or abs(self.dcoupling) > 0.1:
            raise ValueError(f"Offsets must be small: dt={self.dt}, dcoupling={self.dcoupling}")
        if self.size is None:
            self.size = MODEL_DEFAULTS[self.model]["size"]
        if self.size <= 0:
            raise ValueError(f"Size must be positive: {self.size}")
        if self.threshold <= 0:
            raise ValueError(f"Order-parameter threshold must be positive: {self.threshold}")
        if self.jobs < 1:
            raise ValueError(f"Job count must be at least 1: {self.jobs}")

    def t_values(self) -> np.ndarray:
        low, high, count = self.t_range
        return np.linspace(low, high, int(count))

    def couplings(self) -> np.ndarray:
        low, high, count = self.coupling_range
        return np.linspace(low, high, int(count))

    @property
    def coupling_step(self) -> float:
        low, high, count = self.coupling_range
        return (high - low) / (int(count) - 1)


@dataclass
class SweepCell:
    """Results for one grid cell"""

    t: float
    coupling: float
    order_param: float
    mu: Optional[float]
    F: float
    C: float
    H: float
    uhl_dev_max: float
    critical: bool = False
    converged: bool = True
    diagnostics: str = ""

    @classmethod
    def failed(cls, t: float, coupling: float, diagnostics: str) -> "SweepCell":
        nan = float("nan")
        return cls(t, coupling, nan, None, nan, nan, nan, nan, converged=False,
                   diagnostics=diagnostics)

    @property
    def c_minus_f(self) -> float:
        return self.C - self.F

    @property
    def h_minus_f(self) -> float:
        return self.H - self.F

    def to_dict(self) -> dict:
        result = {
            "t": self.t,
            "coupling": self.coupling,
            "order_param": self.order_param,
            "mu": self.mu,
            "F": self.F,
            "C": self.C,
            "H": self.H,
            "C_minus_F": self.c_minus_f,
            "H_minus_F": self.h_minus_f,
            "uhl_dev_max": self.uhl_dev_max,
            "critical": self.critical,
            "converged": self.converged,
        }
        if self.diagnostics:
            result["diagnostics"] = self.diagnostics
        return result


@dataclass
class SweepGrid:
    """Rectangular grid of cells, rows at fixed t"""

    spec: SweepSpec
    t_values: List[float]
    couplings: List[float]
    cells: List[List[SweepCell]]

    def column(self, name: str) -> np.ndarray:
        """2-D array (rows t, columns coupling) of one cell quantity"""
        values = [[cell.to_dict()[name] for cell in row] for row in self.cells]
        return np.asarray(
            [[np.nan if value is None else value for value in row] for row in values],
            dtype=float,
        )

    def iter_cells(self):
        for row in self.cells:
            yield from row

    def failures(self) -> List[SweepCell]:
        return [cell for cell in self.iter_cells() if not cell.converged]

    @property
    def cell_count(self) -> int:
        return len(self.t_values) * len(self.couplings)


@dataclass(frozen=True)
class CriticalPoint:
    t: float
    coupling_c: float
    row: int
    cell: int


@dataclass
class CriticalLine:
    """Onset couplings per row, plus the temperatures of rows with no onset"""

    points: List[CriticalPoint] = field(default_factory=list)
    omitted: List[float] = field(default_factory=list)


@dataclass(frozen=True)
class FidelityDip:
    t: float
    coupling: Optional[float]
    cell: Optional[int]
    flat: bool = False


@dataclass(frozen=True)
class LineComparison:
    t: float
    coupling_c: float
    coupling_dip: Optional[float]
    cells_apart: Optional[int]


@dataclass(frozen=True)
class SusceptibilityCheck:
    lhs: float
    rhs: float
    rel_err: float


@dataclass
class RunConfig:
    """Resolved configuration for one CLI run"""

    model: str = "stoner"
    t_range: Optional[Tuple[float, float, int]] = None
    coupling_range: Optional[Tuple[float, float, int]] = None
    dt: float = 0.0
    dcoupling: Optional[float] = None
    size: Optional[float] = None
    jobs: int = 1
    out: str = "."
    seed: int = 20240917
    draws: int = 1000
    threshold: float = 1e-6
    failure_threshold: float = 1e-3

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ValueError(f"Invalid model: {self.model}")
        defaults = MODEL_DEFAULTS[self.model]
        if self.t_range is None:
            self.t_range = defaults["t"]
        if self.coupling_range is None:
            self.coupling_range = defaults["coupling"]
        if self.dcoupling is None:
            self.dcoupling = defaults["dcoupling"]
        if self.size is None:
            self.size = defaults["size"]
        if self.jobs < 1:
            raise ValueError(f"Job count must be at least 1: {self.jobs}")
        if self.draws < 1:
            raise ValueError(f"Draw count must be at least 1: {self.draws}")
        if not 0 <= self.failure_threshold <= 1:
            raise ValueError(f"Failure threshold must lie in [0, 1]: {self.failure_threshold}")

    @property
    def coupling_key(self) -> str:
        return "du" if self.model == "stoner" else "dv"

    @property
    def size_key(self) -> str:
        return "size" if self.model == "stoner" else "nu"

    def sweep_spec(self) -> SweepSpec:
        return SweepSpec(
            model=self.model,
            t_range=self.t_range,
            coupling_range=self.coupling_range,
            dt=self.dt,
            dcoupling=self.dcoupling,
            size=self.size,
            threshold=self.threshold,
            jobs=self.jobs,
        )

    def to_dict(self) -> dict:
        """Flat mapping with the same keys as the config file"""

        def fmt(values: Tuple[float, float, int]) -> str:
            low, high, count = values
            return f"{low!r}:{high!r}:{int(count)}"

        return {
            "model": self.model,
            "t": fmt(self.t_range),
            "coupling": fmt(self.coupling_range),
            "dt": self.dt,
            self.coupling_key: self.dcoupling,
            self.size_key: self.size,
            "jobs": self.jobs,
            "out": self.out,
            "seed": self.seed,
            "draws": self.draws,
            "threshold": self.threshold,
            "failure_threshold": self.failure_threshold,
        }


@dataclass(frozen=True)
class OracleSuiteResult:
    """Largest deviation of one closed-form family from its dense 4x4 oracle"""

    name: str
    draws: int
    max_deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.max_deviation <= self.tolerance)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "draws": self.draws,
            "max_deviation": self.max_deviation,
            "passed": self.passed,
        }

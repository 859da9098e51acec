"""Sweeps over the (t, coupling) plane, critical-line detection and fidelity-dip analysis"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import bcs, stoner
from .models import (
    BcsParams,
    CriticalLine,
    CriticalPoint,
    DomainError,
    FidelityDip,
    LineComparison,
    ModePoint,
    Quadrature,
    SolverConfig,
    StonerParams,
    StonerState,
    SusceptibilityCheck,
    SweepCell,
    SweepGrid,
    SweepSpec,
)
from .numerics import NumericsError, solve_bracketed

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[int], None]

FLAT_SPREAD = 1e-12
LINE_TOLERANCE = 1e-6

# Failures a single cell may hit without aborting its row.
_CELL_ERRORS = (NumericsError, ValueError, OverflowError, np.linalg.LinAlgError)


def _stoner_row(spec: SweepSpec, i: int) -> List[SweepCell]:
    """One fixed-t row, continuing each solve from the previous coupling"""
    t = float(spec.t_values()[i])
    seed: Optional[StonerState] = None
    cells = []
    for u in spec.couplings():
        u = float(u)
        try:
            p = StonerParams(u=u, t=t, size=spec.size, dt=spec.dt, du=spec.dcoupling)
            state_a = stoner.solve_equilibrium(p, seed=seed)
            state_b = stoner.solve_equilibrium(p.neighbor(), seed=state_a)
            f, c = stoner.total_fidelity(p, state_a, state_b)
            deviation = stoner.uhlmann_deviation_max(
                p, state_a, state_b, stoner.probe_energies(p, state_a)
            )
        except _CELL_ERRORS as exc:
            logger.warning("stoner cell t=%g u=%g failed: %s", t, u, exc)
            cells.append(SweepCell.failed(t, u, f"{type(exc).__name__}: {exc}"))
            continue
        seed = state_a
        # commuting states: Tr[sqrt(rho_a) sqrt(rho_b)] is the partition-function ratio
        cells.append(SweepCell(t, u, state_a.m, state_a.mu, f, c, c, deviation))
    return cells


def _bcs_column(spec: SweepSpec, j: int) -> List[SweepCell]:
    """One fixed-v column, bounding each gap by the gap at the previous temperature"""
    v = float(spec.couplings()[j])
    grid = bcs.mode_density_grid()
    upper_a: Optional[float] = None
    upper_b: Optional[float] = None
    cells = []
    for t in spec.t_values():
        t = float(t)
        try:
            p = BcsParams(v=v, t=t, nu=spec.size, dt=spec.dt, dv=spec.dcoupling)
            neighbor = p.neighbor()
            state_a = bcs.solve_gap(v, t, upper=upper_a)
            state_b = bcs.solve_gap(neighbor.v, neighbor.t, upper=upper_b)
            f, c, h = bcs.total_fidelity(p, state_a, state_b, grid)
            deviation = max(
                bcs.mode_uhlmann(
                    ModePoint(t, state_a.gap, eps), ModePoint(neighbor.t, state_b.gap, eps)
                ).uhl_dev
                for eps in bcs.probe_energies(state_a.gap, state_b.gap, t)
            )
        except _CELL_ERRORS as exc:
            logger.warning("bcs cell t=%g v=%g failed: %s", t, v, exc)
            cells.append(SweepCell.failed(t, v, f"{type(exc).__name__}: {exc}"))
            continue
        upper_a, upper_b = state_a.gap, state_b.gap
        cells.append(SweepCell(t, v, state_a.gap, None, f, c, h, deviation))
    return cells


def _mark_critical(cells: List[List[SweepCell]], threshold: float) -> None:
    for row in cells:
        for left, right in zip(row[:-1], row[1:]):
            if left.order_param <= threshold < right.order_param:
                left.critical = True


def run_sweep(spec: SweepSpec, progress: Optional[ProgressCallback] = None) -> SweepGrid:
    """Evaluate every cell of the grid.

    Stoner rows (fixed t) and BCS columns (fixed v) are the units of work;
    with spec.jobs > 1 they run in a process pool. progress, if given, is
    called with 1 after each finished unit.
    """
    t_values = [float(t) for t in spec.t_values()]
    couplings = [float(c) for c in spec.couplings()]
    if spec.model == "stoner":
        worker, units = _stoner_row, len(t_values)
    else:
        worker, units = _bcs_column, len(couplings)

    results: Dict[int, List[SweepCell]] = {}
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            futures = {pool.submit(worker, spec, k): k for k in range(units)}
            for future in as_completed(futures):
                results[futures[future]] = future.result()
                if progress:
                    progress(1)
    else:
        for k in range(units):
            results[k] = worker(spec, k)
            if progress:
                progress(1)

    if spec.model == "stoner":
        cells = [results[i] for i in range(units)]
    else:
        cells = [[results[j][i] for j in range(units)] for i in range(len(t_values))]
    _mark_critical(cells, spec.threshold)
    grid = SweepGrid(spec=spec, t_values=t_values, couplings=couplings, cells=cells)
    logger.info(
        "%s sweep: %d cells, %d failed", spec.model, grid.cell_count, len(grid.failures())
    )
    return grid


def failure_rate(grid: SweepGrid) -> float:
    return len(grid.failures()) / grid.cell_count


def order_parameter(model: str, t: float, coupling: float) -> float:
    """Order parameter (m or gap) at one point, solved without continuation"""
    if model == "stoner":
        return stoner.solve_equilibrium(StonerParams(u=coupling, t=t)).m
    return bcs.solve_gap(coupling, t).gap


def detect_critical_line(grid: SweepGrid) -> CriticalLine:
    """Onset coupling per row, refined by bisection inside the flagged cell.

    Rows without a flagged cell, or whose refinement fails, are omitted and
    their temperatures recorded.
    """
    spec = grid.spec
    cfg = SolverConfig(step_tolerance=LINE_TOLERANCE)
    line = CriticalLine()
    for i, (t, row) in enumerate(zip(grid.t_values, grid.cells)):
        onset = next((j for j, cell in enumerate(row) if cell.critical), None)
        if onset is None:
            logger.warning("No order-parameter onset in row t=%g", t)
            line.omitted.append(t)
            continue

        def excess(coupling: float, t: float = t) -> float:
            return order_parameter(spec.model, t, coupling) - spec.threshold

        try:
            coupling_c = solve_bracketed(
                excess, grid.couplings[onset], grid.couplings[onset + 1], cfg
            )
        except _CELL_ERRORS as exc:
            logger.warning("Onset refinement failed in row t=%g: %s", t, exc)
            line.omitted.append(t)
            continue
        line.points.append(CriticalPoint(t=t, coupling_c=coupling_c, row=i, cell=onset))
    return line


def locate_fidelity_dip(grid: SweepGrid) -> List[FidelityDip]:
    """Coupling of minimal F in each row; rows with F flat to 1e-12 are flagged"""
    fidelity = grid.column("F")
    dips = []
    for t, values in zip(grid.t_values, fidelity):
        finite = np.isfinite(values)
        if not finite.any():
            dips.append(FidelityDip(t=t, coupling=None, cell=None, flat=True))
            continue
        masked = np.where(finite, values, np.inf)
        spread = float(np.max(values[finite]) - np.min(values[finite]))
        if spread <= FLAT_SPREAD:
            dips.append(FidelityDip(t=t, coupling=None, cell=None, flat=True))
            continue
        cell = int(np.argmin(masked))
        dips.append(FidelityDip(t=t, coupling=grid.couplings[cell], cell=cell))
    return dips


def compare_lines(
    line: CriticalLine, dips: List[FidelityDip], grid: SweepGrid
) -> List[LineComparison]:
    """Pair each critical point with the fidelity dip of its row"""
    rows = []
    for point in line.points:
        dip = dips[point.row]
        apart = None if dip.cell is None else abs(dip.cell - point.cell)
        rows.append(
            LineComparison(
                t=point.t,
                coupling_c=point.coupling_c,
                coupling_dip=dip.coupling,
                cells_apart=apart,
            )
        )
    return rows


def dip_agreement(comparisons: List[LineComparison], cells: int = 1) -> float:
    """Share of rows whose dip lies within the given number of cells of the line"""
    if not comparisons:
        return math.nan
    close = sum(
        1 for row in comparisons if row.cells_apart is not None and row.cells_apart <= cells
    )
    return close / len(comparisons)


# ---------------------------------------------------------------------------
# susceptibility relation


def _second_differences(
    base: StonerParams,
    state: StonerState,
    rule: Tuple[np.ndarray, np.ndarray],
    h: float,
    q: Quadrature,
) -> Tuple[float, float]:
    plus = stoner.solve_equilibrium(base.with_field(h), seed=state, q=q)
    minus = stoner.solve_equilibrium(base.with_field(-h), seed=state, q=q)
    log_z = stoner.log_canonical_partition(base, state, rule)
    log_z_plus = stoner.log_canonical_partition(base.with_field(h), plus, rule)
    log_z_minus = stoner.log_canonical_partition(base.with_field(-h), minus, rule)
    n = base.electrons
    curvature = n * (log_z_plus + log_z_minus - 2.0 * log_z) / (base.beta * h * h)
    response = n * (plus.m - minus.m) / (2.0 * h)
    return curvature, response


def check_susceptibility_relation(
    p: StonerParams, h_probe: float = 1e-4, q: Optional[Quadrature] = None
) -> SusceptibilityCheck:
    """Compare -2 ln C / (beta h^2) with the finite-difference susceptibility.

    C is the ratio of canonical partition functions at probe fields 0 and +-h
    (h is half the field separation). Both sides are extrapolated from h and
    h/2, removing the h^2 error.
    """
    if h_probe <= 0:
        raise DomainError(f"Probe field must be positive: {h_probe}")
    q = q or Quadrature()
    base = p.with_field(0.0)
    state = stoner.solve_equilibrium(base, q=q)
    if state.branch != "paramagnetic":
        raise DomainError(f"Susceptibility relation needs a paramagnetic point: u={p.u}, t={p.t}")
    rule = stoner.fermi_rule(base, state)
    lhs_coarse, rhs_coarse = _second_differences(base, state, rule, h_probe, q)
    lhs_fine, rhs_fine = _second_differences(base, state, rule, 0.5 * h_probe, q)
    lhs = (4.0 * lhs_fine - lhs_coarse) / 3.0
    rhs = (4.0 * rhs_fine - rhs_coarse) / 3.0
    rel_err = abs(lhs - rhs) / abs(rhs)
    logger.debug("susceptibility u=%g t=%g: lhs=%.10g rhs=%.10g", p.u, p.t, lhs, rhs)
    return SusceptibilityCheck(lhs=lhs, rhs=rhs, rel_err=rel_err)

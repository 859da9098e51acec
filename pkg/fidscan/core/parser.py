"""Parsing of run configuration files, range flags and grid CSVs"""

import csv
import logging
import math
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from .models import (
    MODEL_DEFAULTS,
    MODELS,
    CriticalLine,
    CriticalPoint,
    RunConfig,
    SweepCell,
    SweepGrid,
    SweepSpec,
)
from .validator import MODEL_KEYS, RunConfigValidator

logger = logging.getLogger(__name__)

GRID_COLUMNS = (
    "model",
    "t",
    "coupling",
    "order_param",
    "mu",
    "F",
    "C",
    "H",
    "C_minus_F",
    "H_minus_F",
    "uhl_dev_max",
    "critical",
    "converged",
)

_NUMBER = r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?"
_RANGE = re.compile(rf"^\s*({_NUMBER})\s*:\s*({_NUMBER})\s*:\s*(\d+)\s*$")


class ParseError(Exception):
    """Exception raised when parsing fails"""

    pass


def parse_range(text: str) -> Tuple[float, float, int]:
    """Parse a lo:hi:n range"""
    match = _RANGE.match(str(text))
    if not match:
        raise ParseError(f"Invalid range (expected lo:hi:n): {text!r}")
    low, high, count = float(match.group(1)), float(match.group(2)), int(match.group(3))
    if count < 2:
        raise ParseError(f"Range needs at least 2 points: {text!r}")
    if not high > low:
        raise ParseError(f"Range must have positive length: {text!r}")
    return low, high, count


class BaseParser:
    """Base class for parsers"""

    def __init__(self):
        self.validator = None

    def parse_yaml_file(self, file_path: Path) -> Dict[str, Any]:
        """Parse YAML file and return data"""
        try:
            with open(file_path, "r") as f:
                data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ParseError(f"Invalid YAML syntax in {file_path}: {e}")
        except OSError as e:
            raise ParseError(f"Error reading file {file_path}: {e}")
        if not isinstance(data, dict):
            raise ParseError(f"YAML file must contain a mapping: {file_path}")
        return data


class ConfigParser(BaseParser):
    """Parser for run configuration files and manifests"""

    def __init__(self):
        super().__init__()
        self.validator = RunConfigValidator()

    def parse_config_file(self, file_path: Path) -> Dict[str, Any]:
        """Parse and validate a configuration file, returning its raw mapping"""
        data = self.parse_yaml_file(file_path)
        validation_result = self.validator.validate_data(data)
        if not validation_result.is_valid:
            raise ParseError(
                f"Validation failed for {file_path}: {'; '.join(validation_result.errors)}"
            )
        return data

    def create_config_from_data(
        self, data: Dict[str, Any], overrides: Optional[Dict[str, Any]] = None
    ) -> RunConfig:
        """Build a RunConfig; overrides (flags, None meaning unset) win over data"""
        merged = dict(data)
        merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
        model = merged.pop("model", "stoner")
        if model not in MODELS:
            raise ParseError(f"Invalid model: {model}")
        coupling_key, size_key = MODEL_KEYS[model]
        foreign = [
            key
            for other, keys in MODEL_KEYS.items()
            if other != model
            for key in keys
            if key in merged
        ]
        if foreign:
            raise ParseError(f"Options {', '.join(foreign)} do not apply to model {model}")
        code_version = merged.pop("code_version", None)
        if code_version is not None:
            logger.debug("configuration written by version %s", code_version)

        kwargs: Dict[str, Any] = {"model": model}
        if "t" in merged:
            kwargs["t_range"] = parse_range(merged.pop("t"))
        if "coupling" in merged:
            kwargs["coupling_range"] = parse_range(merged.pop("coupling"))
        if coupling_key in merged:
            kwargs["dcoupling"] = float(merged.pop(coupling_key))
        if size_key in merged:
            kwargs["size"] = float(merged.pop(size_key))
        for key in ("dt", "threshold", "failure_threshold"):
            if key in merged:
                kwargs[key] = float(merged.pop(key))
        for key in ("jobs", "seed", "draws"):
            if key in merged:
                kwargs[key] = int(merged.pop(key))
        if "out" in merged:
            kwargs["out"] = str(merged.pop("out"))
        if merged:
            raise ParseError(f"Unknown configuration keys: {', '.join(sorted(merged))}")
        try:
            return RunConfig(**kwargs)
        except ValueError as e:
            raise ParseError(str(e))

    def load(
        self, file_path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None
    ) -> RunConfig:
        """Resolve defaults, then the file (if any), then the flags"""
        data = self.parse_config_file(file_path) if file_path else {}
        return self.create_config_from_data(data, overrides)


class GridParser:
    """Parser for grid CSVs written by a sweep"""

    def parse_grid_file(
        self,
        file_path: Path,
        threshold: float = 1e-6,
        dt: float = 0.0,
        dcoupling: Optional[float] = None,
        size: Optional[float] = None,
    ) -> SweepGrid:
        """Rebuild a SweepGrid from grid.csv.

        The file does not record the offsets or the size, so they come from
        the arguments (model defaults when omitted).
        """
        try:
            with open(file_path, "r", newline="") as f:
                rows = list(csv.DictReader(f))
                header = rows[0].keys() if rows else None
        except OSError as e:
            raise ParseError(f"Error reading file {file_path}: {e}")
        if not rows:
            raise ParseError(f"Grid file has no cells: {file_path}")
        if tuple(header) != GRID_COLUMNS:
            raise ParseError(f"Unexpected grid header in {file_path}: {','.join(header)}")

        models = {row["model"] for row in rows}
        if len(models) != 1 or not models <= set(MODELS):
            raise ParseError(f"Grid file must hold one known model: {sorted(models)}")
        model = models.pop()
        try:
            cells = [self._cell(row) for row in rows]
        except (TypeError, ValueError) as e:
            raise ParseError(f"Malformed grid row in {file_path}: {e}")

        t_values = _unique([cell.t for cell in cells])
        couplings = _unique([cell.coupling for cell in cells])
        if len(cells) != len(t_values) * len(couplings):
            raise ParseError(
                f"Grid is not rectangular: {len(cells)} cells for "
                f"{len(t_values)} x {len(couplings)}"
            )
        index = {(cell.t, cell.coupling): cell for cell in cells}
        try:
            grid_cells = [[index[(t, c)] for c in couplings] for t in t_values]
        except KeyError as e:
            raise ParseError(f"Grid is missing cell {e}")
        try:
            spec = SweepSpec(
                model=model,
                t_range=(t_values[0], t_values[-1], len(t_values)),
                coupling_range=(couplings[0], couplings[-1], len(couplings)),
                dt=dt,
                dcoupling=(
                    MODEL_DEFAULTS[model]["dcoupling"] if dcoupling is None else dcoupling
                ),
                size=size,
                threshold=threshold,
            )
        except ValueError as e:
            raise ParseError(f"Grid file does not describe a sweep: {e}")
        return SweepGrid(spec=spec, t_values=t_values, couplings=couplings, cells=grid_cells)

    def parse_critical_line_file(self, file_path: Path, grid: SweepGrid) -> CriticalLine:
        """Read critical_line.csv back, attaching each point to its row of grid"""
        line = CriticalLine()
        try:
            with open(file_path, "r", newline="") as f:
                rows = list(csv.DictReader(f))
            points = {float(row["t"]): float(row["coupling_c"]) for row in rows}
        except OSError as e:
            raise ParseError(f"Error reading file {file_path}: {e}")
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"Malformed critical-line row in {file_path}: {e}")
        for i, (t, row) in enumerate(zip(grid.t_values, grid.cells)):
            onset = next((j for j, cell in enumerate(row) if cell.critical), None)
            if t not in points or onset is None:
                line.omitted.append(t)
                continue
            line.points.append(CriticalPoint(t=t, coupling_c=points[t], row=i, cell=onset))
        return line

    @staticmethod
    def _cell(row: Dict[str, str]) -> SweepCell:
        def number(key: str) -> float:
            return float(row[key])

        mu = row["mu"]
        return SweepCell(
            t=number("t"),
            coupling=number("coupling"),
            order_param=number("order_param"),
            mu=float(mu) if mu else None,
            F=number("F"),
            C=number("C"),
            H=number("H"),
            uhl_dev_max=number("uhl_dev_max"),
            critical=_flag(row["critical"]),
            converged=_flag(row["converged"]),
        )


def _flag(text: str) -> bool:
    if text not in ("true", "false"):
        raise ValueError(f"expected true or false, got {text!r}")
    return text == "true"


def _unique(values: List[float]) -> List[float]:
    if any(math.isnan(value) for value in values):
        raise ParseError("Grid coordinates must be finite")
    return sorted(set(values))

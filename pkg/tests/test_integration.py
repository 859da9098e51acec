"""Integration tests for fidscan"""

import csv
import re
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from fidscan.cli.commands import cli
from fidscan.core import bcs, scanner, stoner
from fidscan.core.models import SweepSpec
from fidscan.core.parser import GridParser


def _read_line(path):
    with open(path, newline="") as f:
        return [(float(row["t"]), float(row["coupling_c"])) for row in csv.DictReader(f)]


@pytest.mark.integration
@pytest.mark.slow
class TestEndToEndWorkflow:
    """Test complete end-to-end workflows"""

    def test_bcs_workflow(self, sample_config_path, temp_dir):
        """validate -> scan -> export on the sample configuration"""
        runner = CliRunner()

        result = runner.invoke(cli, ["validate", str(sample_config_path)])
        assert result.exit_code == 0

        out = temp_dir / "bcs"
        result = runner.invoke(cli, ["scan", "--config", str(sample_config_path), "--out", str(out)])
        assert result.exit_code == 0, result.output

        line = _read_line(out / "critical_line.csv")
        assert len(line) == 4
        for t, coupling_c in line:
            assert bcs.critical_temperature(coupling_c) == pytest.approx(t, rel=1e-4)

        result = runner.invoke(cli, ["validate", str(out / "manifest.yaml")])
        assert result.exit_code == 0

        grid = GridParser().parse_grid_file(out / "grid.csv")
        assert grid.spec.model == "bcs"
        assert len(grid.t_values) == len(grid.couplings) == 5

        pytest.importorskip("openpyxl")
        workbook = temp_dir / "bcs.xlsx"
        result = runner.invoke(
            cli, ["export", "--grid", str(out / "grid.csv"), "--output", str(workbook)]
        )
        assert result.exit_code == 0
        assert workbook.exists()

    def test_stoner_workflow(self, temp_dir):
        """scan, then re-analyse the written grid with critical --grid"""
        runner = CliRunner()
        out = temp_dir / "stoner"
        args = ["--model", "stoner", "--t", "0.01:0.02:2", "--coupling", "0.95:1.05:11"]

        result = runner.invoke(cli, ["scan", *args, "--out", str(out)])
        assert result.exit_code == 0, result.output
        line = _read_line(out / "critical_line.csv")
        assert len(line) == 2
        for t, coupling_c in line:
            assert coupling_c == pytest.approx(stoner.critical_coupling(t), abs=0.02)

        again = temp_dir / "again"
        result = runner.invoke(
            cli, ["critical", "--grid", str(out / "grid.csv"), "--out", str(again)]
        )
        assert result.exit_code == 0, result.output
        assert (again / "critical_line.csv").read_bytes() == (
            out / "critical_line.csv"
        ).read_bytes()
        assert (again / "line_compare.csv").read_bytes() == (
            out / "line_compare.csv"
        ).read_bytes()


@pytest.fixture(scope="module")
def bcs_grid():
    spec = SweepSpec(
        model="bcs",
        t_range=(0.02, 0.06, 5),
        coupling_range=(0.25, 0.35, 11),
        dcoupling=1e-3,
        size=500.0,
    )
    return scanner.run_sweep(spec)


@pytest.fixture(scope="module")
def stoner_grid():
    spec = SweepSpec(
        model="stoner",
        t_range=(0.08, 0.12, 2),
        coupling_range=(0.9, 1.14, 13),
        dcoupling=2e-3,
    )
    return scanner.run_sweep(spec)


def _line_and_rows(grid):
    line = scanner.detect_critical_line(grid)
    rows = scanner.compare_lines(line, scanner.locate_fidelity_dip(grid), grid)
    return line, rows


@pytest.mark.integration
@pytest.mark.slow
class TestComputedGrids:
    """Line, dip and C, H, F checks on grids computed from scratch"""

    def test_stoner_sweep_completes(self, stoner_grid):
        """Paramagnetic and ordered cells all converge and the line is found in every row"""
        assert scanner.failure_rate(stoner_grid) == 0.0
        line, rows = _line_and_rows(stoner_grid)
        assert len(line.points) == 2
        assert rows
        for point in line.points:
            assert point.coupling_c == pytest.approx(stoner.critical_coupling(point.t), abs=1e-3)

    def test_stoner_dip_on_line(self, stoner_grid):
        _, rows = _line_and_rows(stoner_grid)
        assert scanner.dip_agreement(rows) == 1.0

    def test_stoner_off_line(self, stoner_grid):
        """Below the onset F stays at 1, and C = H = F everywhere"""
        line, _ = _line_and_rows(stoner_grid)
        for point in line.points:
            row = stoner_grid.cells[point.row]
            for cell in row[: point.cell]:
                assert 1.0 - cell.F <= 1e-9
            for cell in row:
                assert cell.H == cell.C
                assert abs(cell.C - cell.F) <= 1e-10

    def test_bcs_dip_on_line(self, bcs_grid):
        _, rows = _line_and_rows(bcs_grid)
        assert len(rows) == 4
        assert scanner.dip_agreement(rows) == 1.0

    def test_bcs_strict_gaps_peak_at_line(self, bcs_grid):
        """C - F and H - F are most negative within one cell of the line"""
        line, _ = _line_and_rows(bcs_grid)
        c_minus_f = bcs_grid.column("C") - bcs_grid.column("F")
        h_minus_f = bcs_grid.column("H") - bcs_grid.column("F")
        for point in line.points:
            assert abs(int(np.argmin(c_minus_f[point.row])) - point.cell) <= 1
            assert abs(int(np.argmin(h_minus_f[point.row])) - point.cell) <= 1
            assert c_minus_f[point.row].min() < 0.0
            assert h_minus_f[point.row].min() < 0.0

    def test_bcs_normal_phase_is_exact(self, bcs_grid):
        """Cells whose both points are normal have F = C = H = 1 exactly"""
        line, _ = _line_and_rows(bcs_grid)
        checked = 0
        for point in line.points:
            for cell in bcs_grid.cells[point.row][: point.cell]:
                assert (cell.F, cell.C, cell.H) == (1.0, 1.0, 1.0)
                assert cell.uhl_dev_max <= 1e-10
                checked += 1
        assert checked > 0


class TestProjectManifest:
    """Test cases for pyproject.toml"""

    def test_coverage_patterns(self):
        """The manifest parses and its coverage exclusions are the intended regexes"""
        try:
            import tomllib
        except ImportError:
            tomllib = pytest.importorskip("tomli")
        with open(Path(__file__).parent.parent / "pyproject.toml", "rb") as f:
            manifest = tomllib.load(f)
        patterns = manifest["tool"]["coverage"]["report"]["exclude_lines"]
        lines = ["class Codec(Protocol):", "@abc.abstractmethod", "@abstractmethod"]
        for line in lines:
            assert any(re.search(pattern, line) for pattern in patterns)

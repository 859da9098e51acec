"""Tests for fidscan.core.exporter"""

import math

import pytest
import yaml

from fidscan.core import exporter
from fidscan.core.exporter import (
    CRITICAL_LINE_COLUMNS,
    LINE_COMPARE_COLUMNS,
    format_value,
    write_critical_line_csv,
    write_grid_csv,
    write_line_compare_csv,
    write_manifest,
    write_plot_script,
)
from fidscan.core.models import (
    CriticalLine,
    CriticalPoint,
    FidelityDip,
    LineComparison,
    RunConfig,
    SweepCell,
)
from fidscan.core.parser import GRID_COLUMNS, ConfigParser


@pytest.fixture
def line():
    return CriticalLine(
        points=[CriticalPoint(0.1, 0.93, 0, 1), CriticalPoint(0.2, 0.94, 1, 1)],
        omitted=[0.3],
    )


class TestFormatValue:
    """Test cases for CSV field formatting"""

    def test_values(self):
        assert format_value(None) == ""
        assert format_value(True) == "true"
        assert format_value(False) == "false"
        assert format_value(3) == "3"
        assert format_value("bcs") == "bcs"
        assert format_value(0.1) == "0.10000000000000001"
        assert format_value(1.0) == "1"

    def test_float_round_trip(self):
        value = 1.0 / 3.0
        assert float(format_value(value)) == value

    def test_nan(self):
        assert format_value(math.nan) == "nan"


class TestCsvWriters:
    """Test cases for the result tables"""

    def test_grid_csv(self, synthetic_grid, temp_dir):
        path = write_grid_csv(synthetic_grid, temp_dir / "grid.csv")
        raw = path.read_bytes()
        assert b"\r\n" not in raw
        lines = raw.decode("utf-8").splitlines()
        assert lines[0] == ",".join(GRID_COLUMNS)
        assert len(lines) == 1 + 15
        first = lines[1].split(",")
        assert first[:3] == ["stoner", "0.10000000000000001", "0.80000000000000004"]
        assert first[-2:] == ["false", "true"]

    def test_grid_order(self, synthetic_grid, temp_dir):
        """Rows by increasing t, couplings increasing within a row"""
        path = write_grid_csv(synthetic_grid, temp_dir / "grid.csv")
        keys = [
            tuple(float(x) for x in line.split(",")[1:3])
            for line in path.read_text().splitlines()[1:]
        ]
        assert keys == sorted(keys)

    def test_failed_cell(self, synthetic_grid, temp_dir):
        synthetic_grid.cells[0][0] = SweepCell.failed(0.1, 0.8, "ConvergenceError: x")
        path = write_grid_csv(synthetic_grid, temp_dir / "grid.csv")
        fields = path.read_text().splitlines()[1].split(",")
        assert fields[4] == ""
        assert fields[5] == "nan"
        assert fields[-1] == "false"

    def test_critical_line_csv(self, line, temp_dir):
        path = write_critical_line_csv(line, temp_dir / "critical_line.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(CRITICAL_LINE_COLUMNS)
        assert lines[1:] == [
            "0.10000000000000001,0.93000000000000005",
            "0.20000000000000001,0.93999999999999995",
        ]

    def test_line_compare_csv(self, temp_dir):
        rows = [
            LineComparison(0.1, 0.93, 0.9, 0),
            LineComparison(0.2, 0.94, None, None),
        ]
        path = write_line_compare_csv(rows, temp_dir / "line_compare.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(LINE_COMPARE_COLUMNS)
        assert lines[1].endswith(",0")
        assert lines[2].endswith(",,")

    def test_plot_script(self, synthetic_grid, temp_dir):
        script = write_plot_script(synthetic_grid, temp_dir / "plot.gp").read_text()
        assert "'grid.csv' skip 1 using 3:2:6 with image" in script
        assert "'critical_line.csv'" in script
        assert "'line_compare.csv'" in script
        assert "set output 'fidelity.png'" in script
        assert "set xlabel 'u'" in script


class TestManifest:
    """Test cases for the run manifest"""

    def test_manifest_reloads(self, temp_dir):
        """The manifest is a valid config reproducing the run"""
        config = RunConfig(model="bcs", t_range=(0.02, 0.06, 5), jobs=2, out="runs")
        path = write_manifest(config, temp_dir / "manifest.yaml", "0.1.0")
        with open(path) as f:
            data = yaml.safe_load(f)
        assert data["code_version"] == "0.1.0"
        assert list(data) == sorted(data)
        reloaded = ConfigParser().load(path)
        assert reloaded.to_dict() == config.to_dict()


class TestWorkbookExporter:
    """Test cases for the Excel export"""

    def test_export(self, synthetic_grid, line, temp_dir):
        openpyxl = pytest.importorskip("openpyxl")
        dips = [FidelityDip(0.1, 0.9, 1), FidelityDip(0.2, None, None, flat=True)]
        path = exporter.export_workbook(synthetic_grid, temp_dir / "sweep.xlsx", line, dips)
        workbook = openpyxl.load_workbook(path)
        assert workbook.sheetnames == ["Grid", "Critical Line", "Fidelity Dips", "Summary"]
        grid_sheet = workbook["Grid"]
        assert grid_sheet.max_row == 16
        assert grid_sheet.cell(row=1, column=6).value == "F"
        assert grid_sheet.cell(row=2, column=1).value == "stoner"
        assert workbook["Critical Line"].max_row == 3
        labels = {
            row[0].value: row[1].value for row in workbook["Summary"].iter_rows(min_row=3)
        }
        assert labels["Model"] == "stoner"
        assert labels["Rows without onset"] == 1
        assert labels["Flat rows"] == 1

    def test_failed_cells_are_blank(self, synthetic_grid, temp_dir):
        openpyxl = pytest.importorskip("openpyxl")
        synthetic_grid.cells[0][0] = SweepCell.failed(0.1, 0.8, "x")
        path = exporter.export_workbook(synthetic_grid, temp_dir / "sweep.xlsx")
        sheet = openpyxl.load_workbook(path)["Grid"]
        assert sheet.cell(row=2, column=6).value is None

    def test_missing_openpyxl(self, synthetic_grid, temp_dir, mocker):
        mocker.patch.object(exporter, "OPENPYXL_AVAILABLE", False)
        with pytest.raises(ImportError, match="openpyxl is required"):
            exporter.export_workbook(synthetic_grid, temp_dir / "sweep.xlsx")

"""Result files of a sweep: CSV tables, gnuplot script, run manifest and workbook"""

import csv
import math
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence

import yaml

from .models import CriticalLine, FidelityDip, LineComparison, RunConfig, SweepGrid
from .parser import GRID_COLUMNS

try:
    import openpyxl
    from openpyxl.styles import Border, Font, PatternFill, Side
    from openpyxl.worksheet.worksheet import Worksheet

    OPENPYXL_AVAILABLE = True
except ImportError:
    OPENPYXL_AVAILABLE = False

CRITICAL_LINE_COLUMNS = ("t", "coupling_c")
LINE_COMPARE_COLUMNS = ("t", "coupling_c", "coupling_dipF", "cells_apart")


def format_value(value: Any) -> str:
    """Locale-independent text of one CSV field, floats with 17 significant digits"""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return f"{float(value):.17g}"


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(value) for value in row])
    return path


def write_grid_csv(grid: SweepGrid, path: Path) -> Path:
    """One line per cell, rows of increasing t, couplings increasing within a row"""
    model = grid.spec.model
    rows = (
        [model] + [cell.to_dict()[column] for column in GRID_COLUMNS[1:]]
        for cell in grid.iter_cells()
    )
    return _write_csv(path, GRID_COLUMNS, rows)


def write_critical_line_csv(line: CriticalLine, path: Path) -> Path:
    return _write_csv(
        path, CRITICAL_LINE_COLUMNS, ((point.t, point.coupling_c) for point in line.points)
    )


def write_line_compare_csv(comparisons: List[LineComparison], path: Path) -> Path:
    return _write_csv(
        path,
        LINE_COMPARE_COLUMNS,
        ((row.t, row.coupling_c, row.coupling_dip, row.cells_apart) for row in comparisons),
    )


def write_plot_script(grid: SweepGrid, path: Path, image: str = "fidelity.png") -> Path:
    """gnuplot heatmap of F over the plane with the critical line and the dips on top"""
    coupling = "u" if grid.spec.model == "stoner" else "v"
    script = "\n".join(
        [
            f"# F over the (t, {coupling}) plane, {grid.spec.model} model",
            "set datafile separator ','",
            "set terminal pngcairo size 900,700",
            f"set output '{image}'",
            f"set xlabel '{coupling}'",
            "set ylabel 't'",
            f"set title 'fidelity F ({grid.spec.model})'",
            "set palette rgbformulae 33,13,10",
            f"set xrange [{format_value(grid.couplings[0])}:{format_value(grid.couplings[-1])}]",
            f"set yrange [{format_value(grid.t_values[0])}:{format_value(grid.t_values[-1])}]",
            "plot 'grid.csv' skip 1 using 3:2:6 with image notitle, \\",
            "     'critical_line.csv' skip 1 using 2:1 with lines lw 2 lc rgb 'white'"
            " title 'critical line', \\",
            "     'line_compare.csv' skip 1 using 3:1 with points pt 7 ps 0.4 lc rgb 'black'"
            " title 'argmin F'",
            "",
        ]
    )
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(script)
    return path


def write_manifest(config: RunConfig, path: Path, code_version: str) -> Path:
    """Resolved configuration plus code version; loadable again with --config"""
    data = config.to_dict()
    data["code_version"] = code_version
    with open(path, "w", newline="", encoding="utf-8") as f:
        yaml.safe_dump(data, f, sort_keys=True, default_flow_style=False)
    return path


class SweepWorkbookExporter:
    """Export a sweep grid, its critical line and fidelity dips to an Excel workbook"""

    HEADER_FILL = "366092"

    def __init__(
        self,
        grid: SweepGrid,
        line: Optional[CriticalLine] = None,
        dips: Optional[List[FidelityDip]] = None,
    ):
        self.grid = grid
        self.line = line or CriticalLine()
        self.dips = dips or []

    def export_to_excel(self, output_path: Path) -> None:
        """Export sweep results to Excel file"""
        if not OPENPYXL_AVAILABLE:
            raise ImportError(
                "openpyxl is required for Excel export. Install with: pip install openpyxl"
            )

        workbook = openpyxl.Workbook()
        workbook.remove(workbook.active)

        self._create_grid_sheet(workbook)
        self._create_line_sheet(workbook)
        self._create_dips_sheet(workbook)
        self._create_summary_sheet(workbook)

        workbook.save(output_path)

    def _create_grid_sheet(self, workbook: "openpyxl.Workbook") -> None:
        ws = workbook.create_sheet("Grid", 0)
        self._write_header(ws, GRID_COLUMNS)
        for row, cell in enumerate(self.grid.iter_cells(), 2):
            record = cell.to_dict()
            ws.cell(row=row, column=1, value=self.grid.spec.model)
            for col, column in enumerate(GRID_COLUMNS[1:], 2):
                ws.cell(row=row, column=col, value=_cell_value(record[column]))
        ws.freeze_panes = "A2"
        self._auto_adjust_columns(ws)

    def _create_line_sheet(self, workbook: "openpyxl.Workbook") -> None:
        ws = workbook.create_sheet("Critical Line", 1)
        self._write_header(ws, ("t", "coupling_c", "row", "cell"))
        for row, point in enumerate(self.line.points, 2):
            for col, value in enumerate((point.t, point.coupling_c, point.row, point.cell), 1):
                ws.cell(row=row, column=col, value=value)
        if self.line.points:
            self._add_borders(ws, 1, 1, len(self.line.points) + 1, 4)
        self._auto_adjust_columns(ws)

    def _create_dips_sheet(self, workbook: "openpyxl.Workbook") -> None:
        ws = workbook.create_sheet("Fidelity Dips", 2)
        self._write_header(ws, ("t", "coupling_dipF", "cell", "flat"))
        for row, dip in enumerate(self.dips, 2):
            for col, value in enumerate((dip.t, dip.coupling, dip.cell, dip.flat), 1):
                ws.cell(row=row, column=col, value=value)
        self._auto_adjust_columns(ws)

    def _create_summary_sheet(self, workbook: "openpyxl.Workbook") -> None:
        ws = workbook.create_sheet("Summary", 3)
        ws.cell(row=1, column=1, value="Fidelity Sweep Summary")
        ws.cell(row=1, column=1).font = Font(bold=True, size=14)

        spec = self.grid.spec
        failures = len(self.grid.failures())
        rows = [
            ("Generated", datetime.now().strftime("%Y-%m-%d %H:%M:%S")),
            ("Model", spec.model),
            ("Temperatures", len(self.grid.t_values)),
            ("Couplings", len(self.grid.couplings)),
            ("dt", spec.dt),
            ("dcoupling", spec.dcoupling),
            ("Failed cells", failures),
            ("Failure rate", failures / self.grid.cell_count),
            ("Critical points", len(self.line.points)),
            ("Rows without onset", len(self.line.omitted)),
            ("Flat rows", sum(1 for dip in self.dips if dip.flat)),
        ]
        for row, (label, value) in enumerate(rows, 3):
            ws.cell(row=row, column=1, value=label).font = Font(bold=True)
            ws.cell(row=row, column=2, value=value)
        self._auto_adjust_columns(ws)

    def _write_header(self, ws: "Worksheet", headers: Sequence[str]) -> None:
        for col, header in enumerate(headers, 1):
            cell = ws.cell(row=1, column=col, value=header)
            cell.fill = PatternFill(
                start_color=self.HEADER_FILL, end_color=self.HEADER_FILL, fill_type="solid"
            )
            cell.font = Font(bold=True, color="FFFFFF")

    def _auto_adjust_columns(self, ws: "Worksheet") -> None:
        """Auto-adjust column widths based on content"""
        from openpyxl.utils import get_column_letter

        for col_idx in range(1, ws.max_column + 1):
            max_length = 0
            for row_idx in range(1, ws.max_row + 1):
                value = ws.cell(row=row_idx, column=col_idx).value
                if value is not None:
                    max_length = max(max_length, len(str(value)))
            if max_length > 0:
                ws.column_dimensions[get_column_letter(col_idx)].width = min(
                    max_length + 2, 50
                )

    def _add_borders(
        self, ws: "Worksheet", start_row: int, start_col: int, end_row: int, end_col: int
    ) -> None:
        """Add borders to a range of cells"""
        thin_border = Border(
            left=Side(style="thin"),
            right=Side(style="thin"),
            top=Side(style="thin"),
            bottom=Side(style="thin"),
        )
        for row in range(start_row, end_row + 1):
            for col in range(start_col, end_col + 1):
                ws.cell(row=row, column=col).border = thin_border


def _cell_value(value: Any) -> Any:
    # NaN is not a valid spreadsheet number
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def export_workbook(
    grid: SweepGrid,
    path: Path,
    line: Optional[CriticalLine] = None,
    dips: Optional[List[FidelityDip]] = None,
) -> Path:
    SweepWorkbookExporter(grid, line, dips).export_to_excel(path)
    return path

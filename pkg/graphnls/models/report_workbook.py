"""
Excel Run Report
Styled workbook with a summary sheet, one sheet per result table and a checks sheet
"""

from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from openpyxl import Workbook
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
from openpyxl.utils import get_column_letter

from graphnls.models.tables import clean

Table = Tuple[Sequence[str], Sequence[Sequence[Any]]]

NUMBER_FORMAT = "0.00000000000E+00"


class RunReportWorkbook:
    """Spreadsheet view of one CLI run"""

    STYLES = {
        'value_font': Font(color="0000FF"),
        'header_font': Font(bold=True, size=11),
        'title_font': Font(bold=True, size=14),
        'section_font': Font(bold=True, size=11, color="FFFFFF"),
        'section_fill': PatternFill(start_color="2F5496", end_color="2F5496", fill_type="solid"),
        'pass_fill': PatternFill(start_color="D9EAD3", end_color="D9EAD3", fill_type="solid"),
        'fail_fill': PatternFill(start_color="FFC7CE", end_color="FFC7CE", fill_type="solid"),
        'border': Border(
            left=Side(style='thin'),
            right=Side(style='thin'),
            top=Side(style='thin'),
            bottom=Side(style='thin')
        ),
    }

    def __init__(self, report: Dict[str, Any], tables: Optional[Dict[str, Table]] = None):
        self.report = clean(report)
        self.tables = tables or {}
        self.wb = Workbook()

    def _setup_sheet(self, ws, title: str, n_columns: int = 8):
        ws.title = title[:31]
        ws.column_dimensions['A'].width = 32
        for i in range(2, n_columns + 2):
            ws.column_dimensions[get_column_letter(i)].width = 20

    def _add_title(self, ws, row: int, text: str) -> int:
        cell = ws.cell(row=row, column=1, value=text)
        cell.font = self.STYLES['title_font']
        return row + 2

    def _add_section_header(self, ws, row: int, text: str, span: int = 4) -> int:
        cell = ws.cell(row=row, column=1, value=text)
        cell.font = self.STYLES['section_font']
        cell.fill = self.STYLES['section_fill']
        ws.merge_cells(start_row=row, start_column=1, end_row=row, end_column=span)
        return row + 1

    def _add_value_cell(self, ws, row: int, col: int, value):
        if isinstance(value, (list, dict)):
            value = str(value)
        cell = ws.cell(row=row, column=col, value=value)
        cell.font = self.STYLES['value_font']
        cell.border = self.STYLES['border']
        if isinstance(value, float):
            cell.number_format = NUMBER_FORMAT
        return cell

    def build_summary_sheet(self):
        ws = self.wb.active
        self._setup_sheet(ws, "Summary", 2)
        row = self._add_title(ws, 1, f"graphnls {self.report.get('command', 'run')} report")

        scalars = [(k, v) for k, v in self.report.items() if not isinstance(v, dict)]
        sections = [(k, v) for k, v in self.report.items() if isinstance(v, dict)]

        row = self._add_section_header(ws, row, "RUN", 2)
        for key, value in scalars:
            ws.cell(row=row, column=1, value=key)
            self._add_value_cell(ws, row, 2, value)
            row += 1

        for name, section in sections:
            row += 1
            row = self._add_section_header(ws, row, name.upper(), 2)
            for key, value in section.items():
                ws.cell(row=row, column=1, value=key)
                self._add_value_cell(ws, row, 2, value)
                row += 1
        return ws

    def build_table_sheet(self, name: str, header: Sequence[str], rows: Sequence[Sequence[Any]]):
        ws = self.wb.create_sheet(name[:31])
        self._setup_sheet(ws, name, len(header))
        for col, title in enumerate(header, start=1):
            cell = ws.cell(row=1, column=col, value=title)
            cell.font = self.STYLES['header_font']
            cell.alignment = Alignment(horizontal="center")
        for r, values in enumerate(rows, start=2):
            for col, value in enumerate(clean(list(values)), start=1):
                self._add_value_cell(ws, r, col, value)
        ws.freeze_panes = "A2"
        return ws

    def build_checks_sheet(self, checks: List[Tuple[str, Optional[bool], str]]):
        """Bound and consistency checks as PASS / FAIL / n/a rows"""
        ws = self.wb.create_sheet("Checks")
        self._setup_sheet(ws, "Checks", 3)
        row = self._add_title(ws, 1, "Checks")
        row = self._add_section_header(ws, row, "BOUNDS AND CONSISTENCY", 3)
        for col, title in enumerate(("Check", "Status", "Description"), start=1):
            ws.cell(row=row, column=col, value=title).font = self.STYLES['header_font']
        row += 1
        for name, ok, description in checks:
            ws.cell(row=row, column=1, value=name)
            status = "n/a" if ok is None else ("PASS" if ok else "FAIL")
            cell = ws.cell(row=row, column=2, value=status)
            cell.border = self.STYLES['border']
            if ok is not None:
                cell.fill = self.STYLES['pass_fill'] if ok else self.STYLES['fail_fill']
            ws.cell(row=row, column=3, value=description)
            row += 1
        return ws

    def generate(self, output_path: Union[str, Path],
                 checks: Optional[List[Tuple[str, Optional[bool], str]]] = None) -> Path:
        self.build_summary_sheet()
        for name, (header, rows) in self.tables.items():
            self.build_table_sheet(name, header, rows)
        if checks:
            self.build_checks_sheet(checks)
        self.wb.active = self.wb["Summary"]
        output_path = Path(output_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        self.wb.save(output_path)
        return output_path


def generate_report_workbook(report: Dict[str, Any], output_path: Union[str, Path],
                             tables: Optional[Dict[str, Table]] = None,
                             checks: Optional[List[Tuple[str, Optional[bool], str]]] = None) -> Path:
    """Convenience function to write the run report workbook"""
    return RunReportWorkbook(report, tables).generate(output_path, checks)

"""
Experiment summary PDF
Renders the merged criteria table of a frontlab report with fpdf2
"""
import json
import logging
from pathlib import Path
from typing import Any, Sequence, Union

from fpdf import FPDF

logger = logging.getLogger(__name__)

# core PDF fonts are latin-1 only
_TRANSLITERATION = {
    "λ": "lambda", "ν": "nu", "η": "eta", "α": "alpha", "β": "beta", "μ": "mu", "δ": "delta",
    "ε": "eps", "ξ": "xi", "Δ": "Delta", "±": "+/-", "√": "sqrt", "≤": "<=", "≥": ">=", "−": "-",
    "→": "->", "∞": "inf",
}

_PASS_RGB = (34, 197, 94)
_FAIL_RGB = (220, 38, 38)


def sanitize_for_pdf(text: Any) -> str:
    """
    Transliterate Greek letters and math symbols, then drop anything outside latin-1

    Args:
        text: Value to print

    Returns:
        latin-1 safe string
    """
    if text is None:
        return ""
    if not isinstance(text, str):
        text = json.dumps(text) if isinstance(text, (list, dict)) else str(text)
    for glyph, plain in _TRANSLITERATION.items():
        text = text.replace(glyph, plain)
    return text.encode("latin-1", "ignore").decode("latin-1").strip()


def _short(value: Any, width: int = 28) -> str:
    if isinstance(value, float):
        value = f"{value:.6g}"
    text = sanitize_for_pdf(value)
    return text if len(text) <= width else text[: width - 3] + "..."


class ExperimentReportPDF(FPDF):
    """Report layout: title header, one section per experiment, page-numbered footer"""

    COLUMNS = (("criterion", 62), ("measured", 40), ("expected", 40), ("tol", 18), ("pass", 16))

    def __init__(self, title: str = "frontlab experiment report"):
        super().__init__()
        self.title_text = sanitize_for_pdf(title)
        self.set_auto_page_break(auto=True, margin=15)

    def header(self):
        self.set_font("Helvetica", "B", 16)
        self.set_text_color(20, 60, 120)
        self.cell(0, 10, self.title_text, new_x="LMARGIN", new_y="NEXT", align="C")
        self.set_draw_color(200, 200, 200)
        self.line(10, self.get_y(), 200, self.get_y())
        self.ln(4)

    def footer(self):
        self.set_y(-15)
        self.set_font("Helvetica", "I", 8)
        self.set_text_color(128, 128, 128)
        self.cell(0, 5, f"Page {self.page_no()}", align="C")

    def add_section_title(self, title: str, passed: bool):
        rgb = _PASS_RGB if passed else _FAIL_RGB
        self.set_font("Helvetica", "B", 12)
        self.set_text_color(*rgb)
        self.cell(0, 8, f"{sanitize_for_pdf(title)}: {'PASS' if passed else 'FAIL'}",
                  new_x="LMARGIN", new_y="NEXT")
        self.set_text_color(0, 0, 0)

    def add_criteria_table(self, criteria: Sequence):
        self.set_font("Helvetica", "B", 9)
        self.set_fill_color(235, 235, 235)
        for label, width in self.COLUMNS:
            self.cell(width, 6, label, border=1, fill=True)
        self.ln()
        self.set_font("Helvetica", "", 8)
        for crit in criteria:
            cells = (_short(crit.name, 36), _short(crit.measured), _short(crit.expected),
                     _short(crit.tolerance, 10), "yes" if crit.passed else "no")
            for (_, width), text in zip(self.COLUMNS, cells):
                self.cell(width, 5, text, border=1)
            self.ln()
        self.ln(4)


def write_report_pdf(records: Sequence, path: Union[str, Path]) -> Path:
    """
    Render report.pdf from experiment records (objects or loaded views)

    Args:
        records: Items with name, passed and criteria attributes
        path: Output file

    Returns:
        Path of the written PDF
    """
    pdf = ExperimentReportPDF()
    pdf.add_page()
    passed = sum(1 for r in records if r.passed)
    pdf.set_font("Helvetica", "", 10)
    pdf.cell(0, 6, f"{passed} of {len(records)} experiments passed", new_x="LMARGIN", new_y="NEXT")
    pdf.ln(4)
    for record in records:
        pdf.add_section_title(record.name, record.passed)
        if record.criteria:
            pdf.add_criteria_table(record.criteria)
        else:
            pdf.set_font("Helvetica", "I", 9)
            pdf.cell(0, 5, "[no criteria recorded]", new_x="LMARGIN", new_y="NEXT")
            pdf.ln(3)
    path = Path(path)
    pdf.output(str(path))
    logger.info("wrote %s", path)
    return path

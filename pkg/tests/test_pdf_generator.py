from types import SimpleNamespace

from utils.pdf_generator import sanitize_for_pdf, write_report_pdf


def test_sanitize_transliterates_symbols():
    assert sanitize_for_pdf("λ ≤ 0, η ± 1") == "lambda <= 0, eta +/- 1"
    assert sanitize_for_pdf(None) == ""
    assert sanitize_for_pdf([1, "A0"]) == '[1, "A0"]'
    # characters outside latin-1 without a transliteration are dropped
    assert sanitize_for_pdf("ok ✓") == "ok"


def test_pdf_lists_every_record(tmp_path):
    crit = SimpleNamespace(name="c_lin", measured=2.0, expected=2.0, tolerance=1e-8, passed=True)
    records = [
        SimpleNamespace(name="spreading_speeds", passed=True, criteria=[crit]),
        SimpleNamespace(name="empty", passed=False, criteria=[]),
    ]
    path = write_report_pdf(records, tmp_path / "report.pdf")
    data = path.read_bytes()
    assert data.startswith(b"%PDF")
    assert len(data) > 500

"""
Output writing for frontlab runs
Deterministic CSV, JSON and Markdown emitters
"""
import dataclasses
import json
import logging
import math
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Union

import numpy as np
import pandas as pd

from utils.config import Config
from utils.errors import ConfigError, ContractViolation

logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]

CRITERIA_COLUMNS = ["experiment", "criterion", "measured", "expected", "tolerance", "provenance", "pass"]


def _round(x: float) -> Any:
    if not math.isfinite(x):
        return None
    return float(f"{x:.{Config.SIGNIFICANT_DIGITS}g}")


def jsonable(obj: Any) -> Any:
    """Convert results to JSON-safe values; floats keep 12 significant digits, NaN becomes null"""
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _round(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _round(obj.real), "im": _round(obj.imag)}
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, Mapping):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return jsonable({f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)})
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def ensure_writable(out_dir: PathLike) -> Path:
    """Create the output directory and fail before any computation if it cannot be written"""
    path = Path(out_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {str(path)!r} cannot be created: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output directory {str(path)!r} is not writable")
    return path


def write_json(obj: Any, path: PathLike) -> Path:
    path = Path(path)
    text = json.dumps(jsonable(obj), indent=2, ensure_ascii=False)
    path.write_text(text + "\n", encoding="utf-8", newline="\n")
    logger.debug("wrote %s", path)
    return path


def write_table(frame: pd.DataFrame, path: PathLike) -> Path:
    """CSV with header, comma separator, LF endings and 12 significant digits"""
    path = Path(path)
    frame.to_csv(path, index=False, float_format=f"%.{Config.SIGNIFICANT_DIGITS}g", lineterminator="\n")
    logger.debug("wrote %s (%d rows)", path, len(frame))
    return path


# ---------------------------------------------------------------------------
# frames

def snapshots_frame(snapshots: Sequence) -> pd.DataFrame:
    """Long format t, x, u1..un"""
    if not snapshots:
        return pd.DataFrame(columns=["t", "x"])
    n = snapshots[0].values.shape[0]
    blocks = []
    for snap in snapshots:
        block = {"t": np.full(snap.x.size, snap.t), "x": snap.x}
        for k in range(n):
            block[f"u{k + 1}"] = snap.values[k]
        blocks.append(pd.DataFrame(block))
    return pd.concat(blocks, ignore_index=True)


def fronts_frame(tracks: Iterable) -> pd.DataFrame:
    rows = []
    for track in tracks:
        for t, x in zip(track.times, track.positions):
            rows.append({"t": t, "component": str(track.component), "level": track.level, "x_level": x})
    return pd.DataFrame(rows, columns=["t", "component", "level", "x_level"])


def profile_frame(profile) -> pd.DataFrame:
    data = {"xi": profile.xi}
    for k in range(profile.n_components):
        data[f"u{k + 1}"] = profile.values[:, k]
    return pd.DataFrame(data)


def double_roots_frame(roots: Sequence) -> pd.DataFrame:
    rows = [{"c": r.c, "re_lambda": complex(r.lam).real, "im_lambda": complex(r.lam).imag,
             "re_nu": complex(r.nu).real, "im_nu": complex(r.nu).imag,
             "pinched": "" if r.pinched is None else bool(r.pinched), "degenerate": bool(r.degenerate)}
            for r in roots]
    return pd.DataFrame(rows, columns=["c", "re_lambda", "im_lambda", "re_nu", "im_nu", "pinched", "degenerate"])


def spreading_frame(speed) -> pd.DataFrame:
    return pd.DataFrame([{"c_lin": speed.c_lin, "eta": speed.eta, "d_eff": speed.d_eff}])


def essential_frame(curves: Sequence) -> pd.DataFrame:
    """One row per sample of every essential-spectrum curve"""
    rows = [{"branch": curve.label, "k": k, "re_lambda": lam.real, "im_lambda": lam.imag}
            for curve in curves for k, lam in curve.points]
    return pd.DataFrame(rows, columns=["branch", "k", "re_lambda", "im_lambda"])


def eigenvalues_frame(eigenvalues: Sequence[complex]) -> pd.DataFrame:
    values = np.asarray(eigenvalues, dtype=complex)
    return pd.DataFrame({"re_lambda": values.real, "im_lambda": values.imag})


def _cell(value: Any) -> str:
    value = jsonable(value)
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, (list, dict)):
        return json.dumps(value)
    return str(value)


def criteria_frame(records: Sequence) -> pd.DataFrame:
    rows = []
    for record in records:
        for crit in record.criteria:
            rows.append({
                "experiment": record.name,
                "criterion": crit.name,
                "measured": _cell(crit.measured),
                "expected": _cell(crit.expected),
                "tolerance": _cell(crit.tolerance),
                "provenance": _cell(crit.provenance),
                "pass": bool(crit.passed),
            })
    return pd.DataFrame(rows, columns=CRITERIA_COLUMNS)


def markdown_table(frame: pd.DataFrame) -> str:
    header = "| " + " | ".join(frame.columns) + " |"
    rule = "| " + " | ".join("---" for _ in frame.columns) + " |"
    lines = [header, rule]
    for row in frame.itertuples(index=False):
        lines.append("| " + " | ".join(_cell(v).replace("|", "\\|") for v in row) + " |")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# records and reports

def write_record(record, out_dir: PathLike) -> Path:
    """record.json plus one CSV per table of the record"""
    out = ensure_writable(out_dir)
    write_json(record.to_dict(), out / "record.json")
    for name, frame in sorted(record.tables.items()):
        write_table(frame, out / f"{name}.csv")
    return out


def load_records(run_dir: PathLike) -> List[Dict[str, Any]]:
    """All record.json files below run_dir, sorted by path"""
    records = []
    for path in sorted(Path(run_dir).rglob("record.json")):
        try:
            records.append(json.loads(path.read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            logger.warning("skipping unreadable record %s: %s", path, exc)
    return records


class _RecordView:
    """Attribute access over a record dict loaded from JSON"""

    def __init__(self, data: Mapping[str, Any]):
        self.name = data["name"]
        self.passed = bool(data.get("passed", False))
        self.criteria = [_RecordView._Crit(c) for c in data.get("criteria", [])]

    class _Crit:
        def __init__(self, data: Mapping[str, Any]):
            self.name = data["name"]
            self.measured = data.get("measured")
            self.expected = data.get("expected")
            self.tolerance = data.get("tolerance")
            self.provenance = data.get("provenance")
            self.passed = bool(data.get("passed", False))


def write_report(records: Sequence, out_dir: PathLike, pdf: bool = False) -> Dict[str, Path]:
    """
    Merge experiment records into report.json and report.md (and report.pdf)

    Args:
        records: ExperimentRecord objects or record dicts loaded from disk
        out_dir: Report directory
        pdf: Also render report.pdf

    Returns:
        Mapping of format to written path
    """
    out = ensure_writable(out_dir)
    views = [_RecordView(r) if isinstance(r, Mapping) else r for r in records]
    views = sorted(views, key=lambda r: r.name)
    frame = criteria_frame(views)
    summary = {
        "experiments": [
            {"name": r.name, "passed": bool(r.passed), "criteria": int(len(r.criteria))} for r in views
        ],
        "criteria": frame.to_dict(orient="records"),
        "all_passed": bool(all(r.passed for r in views)) if views else False,
    }
    paths = {"json": write_json(summary, out / "report.json")}
    lines = ["# frontlab report", ""]
    for r in views:
        lines.append(f"- {r.name}: {'PASS' if r.passed else 'FAIL'}")
    lines += ["", markdown_table(frame), ""]
    md = out / "report.md"
    md.write_text("\n".join(lines), encoding="utf-8", newline="\n")
    paths["md"] = md
    if pdf:
        from utils.pdf_generator import write_report_pdf
        paths["pdf"] = write_report_pdf(views, out / "report.pdf")
    logger.info("report written to %s (%d experiments)", out, len(views))
    return paths


def emit(obj: Any, fmt: str, path: PathLike) -> Path:
    """Write a record or table in csv, json or md format"""
    if fmt == "csv":
        if not isinstance(obj, pd.DataFrame):
            raise ContractViolation("csv output needs a table")
        return write_table(obj, path)
    if fmt == "json":
        payload = obj.to_dict() if hasattr(obj, "to_dict") and not isinstance(obj, pd.DataFrame) else obj
        if isinstance(payload, pd.DataFrame):
            payload = payload.to_dict(orient="records")
        return write_json(payload, path)
    if fmt == "md":
        frame = obj if isinstance(obj, pd.DataFrame) else criteria_frame([obj])
        path = Path(path)
        path.write_text(markdown_table(frame) + "\n", encoding="utf-8", newline="\n")
        return path
    raise ContractViolation(f"unknown output format {fmt!r}; expected csv, json or md")

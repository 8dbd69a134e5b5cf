"""
Sweep scheduler
Runs a config template over a Cartesian grid of overrides and keeps a persistent sweep index
"""
import copy
import itertools
import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from models.experiments import run_experiment
from models.invasion_simulator import run, track_front, wake_state
from models.reaction_models import find_equilibria, label_equilibria
from utils.config import Config
from utils.errors import ConfigError, FrontlabError
from utils.report_writer import (emit, ensure_writable, fronts_frame, snapshots_frame, write_json, write_record,
                                 write_table)
from utils.run_config import RunConfig, apply_override, validate_config, write_resolved_config

logger = logging.getLogger(__name__)

INDEX_FILE = "sweep_index.json"
MERGED_FILE = "sweep.csv"
TIMINGS_FILE = "sweep_timings.json"
TRACK_META_FILE = "track_meta.json"


def _wake_box(values: np.ndarray) -> List[tuple]:
    return [(float(row.min()) - 0.5, float(row.max()) + 0.5) for row in values]


def run_point(config: RunConfig, out_dir: Union[str, Path]) -> Dict[str, Any]:
    """
    Execute one config: its experiment if it names one, otherwise a single invasion run

    Args:
        config: Validated run config
        out_dir: Directory for the point's outputs

    Returns:
        Flat summary of scalar results
    """
    out = ensure_writable(out_dir)
    write_resolved_config(config, out)
    if config.experiment is not None:
        record = run_experiment(config.experiment.name, config.experiment.params)
        write_record(record, out)
        summary = {"passed": record.passed}
        summary.update({k: v for k, v in record.measured.items() if isinstance(v, (int, float, str, bool))})
        return summary

    if config.model is None:
        raise ConfigError("config needs a 'model' section or an 'experiment' section")
    model = config.model.build()
    num, track_cfg = config.numerics, config.tracking
    traj = run(model, config.initial.to_initial(), num.T, x_range=num.x_range, h=num.h, dt=num.dt,
               frame_speed=num.frame_speed, bc=num.bc, snapshot_interval=num.snapshot_interval)
    track = track_front(traj.snapshots, track_cfg.component, track_cfg.level, side=track_cfg.side)
    catalogue = label_equilibria(model, find_equilibria(model, _wake_box(traj.final.values)))
    track.wake_state = wake_state(traj.final, track, catalogue, offset=track_cfg.offset)
    emit(snapshots_frame(traj.snapshots), "csv", out / "snapshots.csv")
    emit(fronts_frame([track]), "csv", out / "fronts.csv")
    summary = {
        "speed": track.lab_speed,
        "fitted_speed": track.fitted_speed,
        "sublinear": track.sublinear,
        "wake_state": track.wake_state,
        "status": track.status,
        "near_boundary": track.near_boundary,
    }
    emit(summary, "json", out / TRACK_META_FILE)
    return summary


class SweepManager:
    """
    Cartesian sweeps over dotted config keys

    The index file records each point's parameters, status and error message and is reloaded
    when the same sweep directory is opened again. Wall-clock timestamps go to sweep_timings.json
    so that equal sweeps write byte-identical indexes.
    """

    def __init__(self, sweep_dir: Union[str, Path], template: Dict[str, Any], axes: Dict[str, Sequence[Any]]):
        """
        Args:
            sweep_dir: Output directory of the sweep
            template: Config mapping shared by all points
            axes: Dotted key -> list of values, e.g. {"model.params.beta": [0.4, 0.5]}
        """
        for key, values in axes.items():
            if len(values) == 0:
                raise ConfigError(f"sweep axis {key!r} has no values")
        self.sweep_dir = ensure_writable(sweep_dir)
        self.template = template
        self.axes = {k: list(v) for k, v in axes.items()}
        self.index_file = self.sweep_dir / INDEX_FILE
        self.data = self._load_data()
        self.timings = self._load_timings()

    def _load_data(self) -> Dict:
        if self.index_file.exists():
            try:
                return json.loads(self.index_file.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                logger.warning("unreadable sweep index %s: %s", self.index_file, exc)
        return self._get_empty_data()

    def _get_empty_data(self) -> Dict:
        return {
            "axes": self.axes,
            "points": [],
        }

    def _save_data(self):
        write_json(self.data, self.index_file)

    def _load_timings(self) -> Dict:
        path = self.sweep_dir / TIMINGS_FILE
        if path.exists():
            try:
                return json.loads(path.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                logger.warning("unreadable sweep timings %s: %s", path, exc)
        return {}

    def points(self) -> List[Dict[str, Any]]:
        keys = list(self.axes)
        return [
            {"point_id": f"p{i:04d}", "parameters": dict(zip(keys, combo))}
            for i, combo in enumerate(itertools.product(*(self.axes[k] for k in keys)))
        ]

    def _run_one(self, point: Dict[str, Any]) -> Tuple[Dict[str, Any], Dict[str, str]]:
        timing = {"started_at": datetime.now().isoformat()}
        entry = dict(point)
        data = copy.deepcopy(self.template)
        try:
            for key, value in point["parameters"].items():
                apply_override(data, key, value)
            entry["summary"] = run_point(validate_config(data), self.sweep_dir / point["point_id"])
            entry["status"], entry["error"] = "ok", None
        except FrontlabError as exc:
            logger.warning("sweep point %s failed: %s", point["point_id"], exc)
            entry["summary"], entry["status"], entry["error"] = {}, "failed", f"{type(exc).__name__}: {exc}"
        timing["finished_at"] = datetime.now().isoformat()
        return entry, timing

    def run(self, parallelism: Optional[int] = None) -> pd.DataFrame:
        """
        Run every pending point, write the index and the merged sweep.csv

        Returns:
            Merged table with one row per point
        """
        points = self.points()
        wanted = {p["point_id"]: p["parameters"] for p in points}
        # finished points with unchanged parameters are kept from the index
        done = {e["point_id"]: e for e in self.data.get("points", [])
                if e.get("status") == "ok" and wanted.get(e.get("point_id")) == e.get("parameters")}
        pending = [p for p in points if p["point_id"] not in done]
        n_jobs = Config.resolve_threads(parallelism)
        logger.info("sweep %s: %d points (%d already done) on %d worker(s)", self.sweep_dir, len(points),
                    len(points) - len(pending), n_jobs)
        results = Parallel(n_jobs=n_jobs, prefer="threads")(delayed(self._run_one)(p) for p in pending)
        by_id = dict(done, **{e["point_id"]: e for e, _ in results})
        self.timings.update({e["point_id"]: t for e, t in results})
        entries = [by_id[p["point_id"]] for p in points]
        self.data["axes"] = self.axes
        self.data["points"] = entries
        self._save_data()
        write_json(self.timings, self.sweep_dir / TIMINGS_FILE)
        merged = self.merged_frame()
        write_table(merged, self.sweep_dir / MERGED_FILE)
        failed = sum(1 for e in entries if e["status"] != "ok")
        logger.info("sweep finished: %d ok, %d failed", len(entries) - failed, failed)
        return merged

    def merged_frame(self) -> pd.DataFrame:
        rows = []
        for entry in self.data.get("points", []):
            row = {"point_id": entry["point_id"]}
            row.update(entry["parameters"])
            row["status"] = entry["status"]
            row["error"] = entry.get("error") or ""
            row.update(entry.get("summary") or {})
            rows.append(row)
        frame = pd.DataFrame(rows)
        lead = ["point_id"] + list(self.axes) + ["status", "error"]
        rest = sorted(c for c in frame.columns if c not in lead)
        return frame.reindex(columns=lead + rest)

    def failures(self) -> List[Dict[str, Any]]:
        return [e for e in self.data.get("points", []) if e.get("status") != "ok"]


def parse_axis(spec: str) -> tuple:
    """'key=v1,v2,...' with JSON-literal values (numbers, strings, booleans)"""
    if "=" not in spec:
        raise ConfigError(f"axis {spec!r} must look like key=v1,v2")
    key, raw = spec.split("=", 1)
    values = []
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            values.append(json.loads(item))
        except json.JSONDecodeError:
            values.append(item)
    if not values:
        raise ConfigError(f"axis {key!r} has no values")
    for v in values:
        if isinstance(v, float) and not np.isfinite(v):
            raise ConfigError(f"axis {key!r} has a non-finite value")
    return key.strip(), values

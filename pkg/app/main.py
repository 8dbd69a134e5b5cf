"""
frontlab - command line interface
Double roots, spreading speeds, front profiles, spectra, invasion runs, experiments and sweeps
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from models.dispersion_analyzer import DispersionAnalyzer, linear_spreading_speed
from models.experiments import EXPERIMENTS, run_experiment
from models.front_solver import shoot_scalar_front, solve_front_bvp
from models.reaction_models import ReactionModel
from models.spectrum_analyzer import SpectrumAnalyzer
from utils.config import Config, setup_logging
from utils.errors import ConfigError, CriterionFailure, FrontlabError, exit_code_for
from utils.report_writer import (double_roots_frame, eigenvalues_frame, emit, ensure_writable, essential_frame,
                                 jsonable, load_records, profile_frame, spreading_frame, write_json, write_record,
                                 write_report)
from utils.run_config import (RunConfig, apply_override, parse_config, read_config_data, validate_config,
                              write_resolved_config)
from utils.sweep_manager import SweepManager, parse_axis, run_point

logger = logging.getLogger("frontlab")


# ---------------------------------------------------------------------------
# argument helpers

def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _key_values(pairs: Optional[Sequence[str]]) -> Dict[str, Any]:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"parameter {pair!r} must look like key=value")
        key, raw = pair.split("=", 1)
        try:
            out[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            out[key.strip()] = raw
    return out


def _add_model_args(parser: argparse.ArgumentParser):
    parser.add_argument("--preset", help="Model preset name (e.g. nagumo, skew, forced_cgl)")
    parser.add_argument("--param", action="append", metavar="K=V", help="Preset parameter, repeatable")
    parser.add_argument("--config", help="JSON run config providing the model section")


def _front_config(args) -> RunConfig:
    """Config file (if any) with the command-line values layered on top"""
    data = read_config_data(args.config) if args.config else {}
    if args.preset:
        data["model"] = {"preset": args.preset, "params": {}}
    for key, value in _key_values(args.param).items():
        apply_override(data, f"model.params.{key}", value)
    overrides = {
        "front.at": getattr(args, "at", None),
        "front.c": getattr(args, "c", None),
        "front.state_minus": getattr(args, "from_state", None),
        "front.state_plus": getattr(args, "to", None),
        "front.method": getattr(args, "method", None),
        "front.n_grid": getattr(args, "n_grid", None),
        "numerics.L": getattr(args, "L", None),
        "front.n_seeds": getattr(args, "n_seeds", None),
        "front.check_pinch": False if getattr(args, "no_pinch", False) else None,
    }
    for key, value in overrides.items():
        if value is not None:
            apply_override(data, key, value)
    config = validate_config(data)
    if config.model is None:
        raise ConfigError("give --preset or a config with a 'model' section")
    return config


def _profile(config: RunConfig, model: ReactionModel):
    front, L = config.front, config.numerics.L
    if front.c is None or front.state_minus is None:
        raise ConfigError("front.c and front.state_minus are required for a profile")
    to_state = front.state_plus if front.state_plus is not None else [0.0] * model.n_components
    if front.method == "shoot":
        return shoot_scalar_front(model, front.c, front.state_minus[0], L, to_state[0], front.n_grid)
    return solve_front_bvp(model, front.c, front.state_minus, to_state, L, front.n_grid or 2001)


def _output_dir(args, config: RunConfig) -> Path:
    out = ensure_writable(args.out or Config.OUTPUT_DIR)
    write_resolved_config(config, out)
    return out


# ---------------------------------------------------------------------------
# subcommands

def cmd_droots(args) -> int:
    config = _front_config(args)
    model = config.model.build()
    front = config.front
    at = front.at if front.at is not None else front.state_plus
    if at is None:
        raise ConfigError("front.at (or front.state_plus) names the equilibrium")
    out = _output_dir(args, config)
    analysis = DispersionAnalyzer(model, n_seeds=front.n_seeds, check_pinch=front.check_pinch).analyze(at, front.c)
    emit(double_roots_frame(analysis.double_roots), "csv", out / "double_roots.csv")
    summary = {"c": analysis.c, "double_roots": len(analysis.double_roots)}
    speed = analysis.spreading
    if speed is not None:
        emit(spreading_frame(speed), "csv", out / "spreading.csv")
        summary.update(c_lin=speed.c_lin, eta=speed.eta, d_eff=speed.d_eff)
    print(json.dumps(jsonable(summary), indent=2))
    return 0


def cmd_speed(args) -> int:
    config = _front_config(args)
    model = config.model.build()
    speed = linear_spreading_speed(model, args.at, frame_speed=args.frame_speed)
    payload = {"c_lin": speed.c_lin, "eta": speed.eta, "d_eff": speed.d_eff, "c_group": speed.c_group}
    if args.out:
        emit(payload, "json", ensure_writable(Path(args.out).parent) / Path(args.out).name)
    print(json.dumps(jsonable(payload), indent=2))
    return 0


def cmd_profile(args) -> int:
    config = _front_config(args)
    model = config.model.build()
    out = _output_dir(args, config)
    profile = _profile(config, model)
    logger.info("profile: c=%.10g eta=%.6g steepness=%s", profile.speed, profile.eta, profile.steepness.value)
    meta = {"c": profile.speed, "eta": profile.eta, "a_plus": profile.a_plus,
            "steepness": profile.steepness, "residual": profile.residual}
    emit(profile_frame(profile), "csv", out / "profile.csv")
    emit(meta, "json", out / "profile_meta.json")
    print(json.dumps(jsonable(meta), indent=2))
    return 0


def cmd_spectrum(args) -> int:
    config = _front_config(args)
    model = config.model.build()
    out = _output_dir(args, config)
    report = SpectrumAnalyzer(model).analyze(_profile(config, model))
    checklist = dict(report.checklist.as_dict(), verdict=report.verdict)
    emit(essential_frame(report.essential), "csv", out / "essential.csv")
    emit(eigenvalues_frame(report.point_eigs), "csv", out / "point_eigs.csv")
    emit(checklist, "json", out / "checklist.json")
    print(json.dumps(jsonable(checklist), indent=2))
    return 0


def cmd_simulate(args) -> int:
    out = ensure_writable(args.out or Config.OUTPUT_DIR)
    config = parse_config(args.config)
    summary = run_point(config, out)
    print(json.dumps(jsonable(summary), indent=2))
    return 0


def _run_one_experiment(name: str, params: Dict[str, Any], out: Path) -> bool:
    record = run_experiment(name, params)
    write_record(record, out)
    write_json({"name": record.name, "runtime": record.runtime}, out / "timings.json")
    for crit in record.criteria:
        logger.info("  %-40s %s", crit.name, "pass" if crit.passed else "FAIL")
    return record.passed


def cmd_experiment(args) -> int:
    out = ensure_writable(args.out or Config.OUTPUT_DIR)
    params = _key_values(args.param)
    if args.name == "all":
        if params:
            raise ConfigError("--param cannot be combined with 'all'")
        passed = [_run_one_experiment(name, {}, out / name) for name in EXPERIMENTS]
    else:
        passed = [_run_one_experiment(args.name, params, out / args.name)]
    if not all(passed):
        raise CriterionFailure(f"{passed.count(False)} experiment(s) failed their criteria")
    return 0


def cmd_sweep(args) -> int:
    template = read_config_data(args.config)
    axes = dict(parse_axis(spec) for spec in args.axis or [])
    manager = SweepManager(args.out or Config.OUTPUT_DIR, template, axes)
    merged = manager.run(parallelism=args.parallelism)
    print(merged.to_string(index=False))
    return 0


def cmd_report(args) -> int:
    records = load_records(args.dir)
    if not records:
        raise ConfigError(f"no record.json found below {args.dir!r}")
    paths = write_report(records, args.out or args.dir, pdf=args.pdf)
    for fmt, path in paths.items():
        print(f"{fmt}: {path}")
    if not all(r.get("passed") for r in records):
        raise CriterionFailure("report contains failed criteria")
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="frontlab", description="Pulled invasion fronts in 1D reaction-diffusion")
    parser.add_argument("--log-level", default=None, help="Logging level (default FRONTLAB_LOG_LEVEL or INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("droots", help="Double roots and spreading speed at an equilibrium")
    _add_model_args(p)
    p.add_argument("--at", type=_floats, default=None, help="Equilibrium, comma separated (front.at)")
    p.add_argument("--c", type=float, default=None, help="Frame speed (default: the linear spreading speed)")
    p.add_argument("--n-seeds", type=int, default=None, help="Number of nu seeds (front.n_seeds)")
    p.add_argument("--no-pinch", action="store_true", help="Skip the pinching check of every root")
    p.add_argument("--out", help="Output directory")
    p.set_defaults(func=cmd_droots)

    p = sub.add_parser("speed", help="Linear spreading speed into an unstable equilibrium")
    _add_model_args(p)
    p.add_argument("--at", type=_floats, required=True, help="Unstable equilibrium, comma separated")
    p.add_argument("--frame-speed", type=float, default=None, help="Report the group offset in this frame")
    p.add_argument("--out", help="Also write the result to this JSON file")
    p.set_defaults(func=cmd_speed)

    for name, func, help_text in (("profile", cmd_profile, "Traveling-front profile by shooting or BVP"),
                                  ("spectrum", cmd_spectrum, "Marginal-stability checklist of a front")):
        p = sub.add_parser(name, help=help_text)
        _add_model_args(p)
        p.add_argument("--c", type=float, default=None, help="Front speed (front.c)")
        p.add_argument("--from", dest="from_state", type=_floats, default=None,
                       help="Left limit state (front.state_minus)")
        p.add_argument("--to", type=_floats, default=None, help="Right limit state (front.state_plus, default 0)")
        p.add_argument("--L", type=float, default=None, help="Half-width of the grid (numerics.L)")
        p.add_argument("--n-grid", type=int, default=None, help="Grid points (front.n_grid)")
        p.add_argument("--method", choices=("bvp", "shoot"), default=None, help="Solver (shoot: scalar only)")
        p.add_argument("--out", help="Output directory")
        p.set_defaults(func=func)

    p = sub.add_parser("simulate", help="Invasion run from a JSON config")
    p.add_argument("--config", required=True, help="JSON run config")
    p.add_argument("--out", help="Output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", help="Run a named experiment")
    p.add_argument("name", choices=sorted(EXPERIMENTS) + ["all"], help="Experiment name")
    p.add_argument("--param", action="append", metavar="K=V", help="Experiment parameter override, repeatable")
    p.add_argument("--out", help="Output directory")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("sweep", help="Cartesian sweep of a config template")
    p.add_argument("--config", required=True, help="JSON config template")
    p.add_argument("--axis", action="append", metavar="KEY=V1,V2", help="Dotted key and values, repeatable")
    p.add_argument("--parallelism", type=int, default=None, help="Worker count (FRONTLAB_THREADS overrides)")
    p.add_argument("--out", help="Sweep directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="Merge experiment records into report.json and report.md")
    p.add_argument("--dir", required=True, help="Directory holding experiment outputs")
    p.add_argument("--out", help="Report directory (default: --dir)")
    p.add_argument("--pdf", action="store_true", help="Also write report.pdf")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        Config.validate_config()
        return args.func(args)
    except FrontlabError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())

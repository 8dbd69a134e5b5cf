"""
Run configuration schema
JSON run configs validated with pydantic before any computation starts
"""
import difflib
import inspect
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Type, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from models.invasion_simulator import BoundaryCondition, InitialData
from models.reaction_models import PRESETS, ReactionModel, TerraceSpec, build_terrace, get_preset
from utils.config import Config
from utils.errors import ConfigError
from utils.report_writer import ensure_writable, write_json

logger = logging.getLogger(__name__)

RESOLVED_CONFIG = "resolved_config.json"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TerraceConfig(_Strict):
    n_levels: int = Field(3, ge=1, le=10)
    levels: Optional[List[float]] = None
    modification_intervals: Optional[List[Tuple[float, float]]] = None
    detune: Optional[List[float]] = None

    def to_spec(self) -> TerraceSpec:
        return TerraceSpec(
            n_levels=self.n_levels,
            levels=tuple(self.levels) if self.levels is not None else None,
            modification_intervals=tuple(tuple(i) for i in self.modification_intervals)
            if self.modification_intervals is not None else None,
            detune=tuple(self.detune) if self.detune is not None else None,
        )


class ModelConfig(_Strict):
    """Either a preset with parameters or a terrace"""
    preset: Optional[str] = None
    params: Dict[str, float] = Field(default_factory=dict)
    terrace: Optional[TerraceConfig] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.preset is None) == (self.terrace is None):
            raise ValueError("give exactly one of 'preset' or 'terrace'")
        if self.preset is not None:
            if self.preset not in PRESETS:
                hint = difflib.get_close_matches(self.preset, PRESETS, n=1)
                raise ValueError(f"unknown preset {self.preset!r}"
                                 + (f"; did you mean {hint[0]!r}?" if hint else f"; available: {sorted(PRESETS)}"))
            accepted = inspect.signature(PRESETS[self.preset]).parameters
            for key in self.params:
                if key not in accepted:
                    raise ValueError(f"preset {self.preset} has no parameter {key!r}; accepted: {list(accepted)}")
        return self

    def build(self) -> ReactionModel:
        if self.terrace is not None:
            return build_terrace(self.terrace.to_spec())
        return get_preset(self.preset, **self.params)


class NumericsConfig(_Strict):
    h: float = Field(Config.GRID_SPACING, gt=0.0, le=1.0)
    dt: float = Field(Config.TIME_STEP, gt=0.0, le=0.1)
    L: float = Field(60.0, gt=0.0, le=1000.0)
    T: float = Field(100.0, gt=0.0)
    x_range: Tuple[float, float] = (-300.0, 300.0)
    frame_speed: float = 0.0
    bc: BoundaryCondition = BoundaryCondition.NEUMANN
    snapshot_interval: float = Field(1.0, gt=0.0)

    @field_validator("x_range")
    @classmethod
    def _ordered(cls, value):
        if value[0] >= value[1]:
            raise ValueError(f"x_range must be increasing, got {value}")
        return value


class InitialConfig(_Strict):
    kind: Literal["step", "bump", "sign_step", "state_step", "cgl_step"] = "step"
    state: List[float] = Field(default_factory=lambda: [1.0])
    state_b: List[float] = Field(default_factory=lambda: [-1.0])
    width: float = Field(10.0, gt=0.0)
    position: float = 0.0
    amplitude: float = 1.0
    phase_index: int = Field(0, ge=0, le=5)

    def to_initial(self) -> InitialData:
        return InitialData(kind=self.kind, state=tuple(self.state), state_b=tuple(self.state_b), width=self.width,
                           position=self.position, amplitude=self.amplitude, phase_index=self.phase_index)


class TrackingConfig(_Strict):
    component: Union[int, Literal["norm"]] = 0
    level: float = 0.5
    offset: float = Field(Config.WAKE_OFFSET, gt=0.0)
    side: Literal["right", "left"] = "right"


class FrontConfig(_Strict):
    """Inputs of the droots, profile and spectrum commands"""
    at: Optional[List[float]] = None
    c: Optional[float] = None
    state_minus: Optional[List[float]] = None
    state_plus: Optional[List[float]] = None
    method: Literal["bvp", "shoot"] = "bvp"
    n_grid: Optional[int] = Field(None, ge=5)
    n_seeds: int = Field(64, ge=8)
    check_pinch: bool = True


class ExperimentConfig(_Strict):
    name: str
    params: Dict[str, Any] = Field(default_factory=dict)


class RunConfig(_Strict):
    model: Optional[ModelConfig] = None
    numerics: NumericsConfig = Field(default_factory=NumericsConfig)
    initial: InitialConfig = Field(default_factory=InitialConfig)
    tracking: TrackingConfig = Field(default_factory=TrackingConfig)
    front: FrontConfig = Field(default_factory=FrontConfig)
    experiment: Optional[ExperimentConfig] = None
    output: str = Config.OUTPUT_DIR
    parallelism: Optional[int] = Field(None, ge=1)


# sections reachable by key path, for close-match suggestions
_SECTIONS: Dict[Tuple[str, ...], Type[BaseModel]] = {
    (): RunConfig,
    ("model",): ModelConfig,
    ("model", "terrace"): TerraceConfig,
    ("numerics",): NumericsConfig,
    ("initial",): InitialConfig,
    ("tracking",): TrackingConfig,
    ("front",): FrontConfig,
    ("experiment",): ExperimentConfig,
}


def _describe(error: Dict[str, Any]) -> str:
    loc = tuple(str(p) for p in error["loc"])
    key = ".".join(loc) or "<root>"
    if error["type"] == "extra_forbidden":
        section = _SECTIONS.get(loc[:-1])
        hint = difflib.get_close_matches(loc[-1], section.model_fields, n=1) if section else []
        suggestion = f"; did you mean {'.'.join(loc[:-1] + (hint[0],))!r}?" if hint else ""
        return f"unknown key {key!r}{suggestion}"
    return f"{key}: {error['msg']} (got {error.get('input')!r})"


def validate_config(data: Dict[str, Any]) -> RunConfig:
    """Validate a config mapping; schema violations become ConfigError naming the key"""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        messages = [_describe(e) for e in exc.errors()]
        raise ConfigError("; ".join(messages)) from None


def read_config_data(path: Union[str, Path]) -> Dict[str, Any]:
    """Raw mapping of a JSON config file, before validation"""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {str(path)!r} does not exist")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def parse_config(path: Union[str, Path], out_dir: Optional[Union[str, Path]] = None) -> RunConfig:
    """
    Load and validate a JSON run config

    Args:
        path: Config file
        out_dir: When given, the resolved config is echoed there as resolved_config.json

    Returns:
        Validated RunConfig with defaults applied
    """
    config = validate_config(read_config_data(path))
    logger.info("loaded config %s", path)
    if out_dir is not None:
        write_resolved_config(config, out_dir)
    return config


def write_resolved_config(config: RunConfig, out_dir: Union[str, Path]) -> Path:
    out = ensure_writable(out_dir)
    return write_json(config.model_dump(mode="json"), out / RESOLVED_CONFIG)


def apply_override(data: Dict[str, Any], key: str, value: Any) -> Dict[str, Any]:
    """Set a dotted key such as 'model.params.beta' in a nested config mapping"""
    node = data
    parts = key.split(".")
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"cannot set {key!r}: {part!r} is not a section")
        node = child
    node[parts[-1]] = value
    return data

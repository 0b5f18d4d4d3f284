"""Engine configuration: parameter blocks, file loading, and validation.

The config file is YAML with blocks ``grid``, ``maf``, ``vrf``, ``rpf``,
``visibility``, ``predictor``, ``ablation``, ``scoring``, ``planner``.
Every block is optional; omitted values take the documented defaults.
Unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import yaml

from .maf import MafParams
from .rpf import RpfParams
from .vrf import VrfParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridConfig:
    extent: float = 50.0
    resolution: float = 0.25
    frame: str = "world"  # "world": axis-aligned; "ego": aligned to ego heading

    def __post_init__(self):
        if self.frame not in ("world", "ego"):
            raise ConfigError(f"grid.frame must be 'world' or 'ego', got {self.frame!r}")
        if self.extent <= 0 or self.resolution <= 0:
            raise ConfigError("grid extent and resolution must be > 0")


@dataclass(frozen=True)
class VisibilityConfig:
    ray_count: int = 360
    max_range: float = 50.0

    def __post_init__(self):
        if self.ray_count < 3:
            raise ConfigError("visibility.ray_count must be >= 3")
        if self.max_range <= 0:
            raise ConfigError("visibility.max_range must be > 0")


@dataclass(frozen=True)
class PredictorSettings:
    name: str = "cv3"
    horizon: float = 4.0
    dt: float = 0.2  # hypothesis path sampling step
    probabilities: tuple = (0.6, 0.2, 0.2)
    turn_rate: float = 0.2
    overrides: str | None = None  # path to a hypothesis-override file

    def __post_init__(self):
        if self.horizon <= 0 or self.dt <= 0:
            raise ConfigError("predictor horizon and dt must be > 0")
        total = sum(self.probabilities)
        if total <= 0:
            raise ConfigError("predictor probabilities must have a positive sum")


@dataclass(frozen=True)
class AblationConfig:
    """Component switches; the three enable flags map 1:1 to the ablation rows."""

    enable_maf_velvar: bool = True
    enable_vrf: bool = True
    enable_rpf: bool = True
    # When the VRU field is disabled, optionally route VRUs through the
    # motorized-agent field with a single constant-velocity hypothesis.
    vru_as_maf: bool = False
    severity_at_current_speed: bool = False
    include_ego_lane: bool = False


@dataclass(frozen=True)
class ScoringConfig:
    inflation: float = 0.5
    mode: str = "composed"  # or "own": score each actor on its own component field

    def __post_init__(self):
        if self.inflation < 0:
            raise ConfigError("scoring.inflation must be >= 0")
        if self.mode not in ("composed", "own"):
            raise ConfigError(f"scoring.mode must be 'composed' or 'own', got {self.mode!r}")


@dataclass(frozen=True)
class PlannerConfig:
    horizon_steps: int = 30
    dt: float = 0.1
    wheelbase: float = 2.8
    alpha_risk: float = 1.0
    beta_effort: float = 1.0
    gamma_smooth: float = 1.0
    r_diag: tuple = (1.0, 1.0)
    s_diag: tuple = (1.0, 1.0)
    accel_bounds: tuple = (-4.0, 2.0)
    steer_bound: float = 0.5
    v_max: float = 20.0
    samples: int = 256
    iterations: int = 8
    elite_frac: float = 0.125
    footprint_points: int = 9
    footprint_mode: str = "max"

    def __post_init__(self):
        if self.horizon_steps < 1:
            raise ConfigError("planner.horizon_steps must be >= 1")
        if self.dt <= 0 or self.wheelbase <= 0:
            raise ConfigError("planner.dt and wheelbase must be > 0")
        if min(self.alpha_risk, self.beta_effort, self.gamma_smooth) < 0:
            raise ConfigError("planner weights must be >= 0")
        if min(self.r_diag) <= 0 or min(self.s_diag) <= 0:
            raise ConfigError("planner R and S diagonals must be > 0")
        if self.accel_bounds[0] > self.accel_bounds[1]:
            raise ConfigError("planner.accel_bounds must be (low, high) with low <= high")
        if self.steer_bound <= 0 or self.v_max <= 0:
            raise ConfigError("planner.steer_bound and v_max must be > 0")
        if not 0 < self.elite_frac <= 1:
            raise ConfigError("planner.elite_frac must be in (0, 1]")
        if self.samples < 2 or self.iterations < 1:
            raise ConfigError("planner.samples >= 2 and iterations >= 1 required")
        if self.footprint_mode not in ("max", "mean"):
            raise ConfigError("planner.footprint_mode must be 'max' or 'mean'")


@dataclass(frozen=True)
class EngineConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    maf: MafParams = field(default_factory=MafParams)
    vrf: VrfParams = field(default_factory=VrfParams)
    rpf: RpfParams = field(default_factory=RpfParams)
    visibility: VisibilityConfig = field(default_factory=VisibilityConfig)
    predictor: PredictorSettings = field(default_factory=PredictorSettings)
    ablation: AblationConfig = field(default_factory=AblationConfig)
    scoring: ScoringConfig = field(default_factory=ScoringConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    field_scale: float = 1.0

    def __post_init__(self):
        if self.field_scale <= 0:
            raise ConfigError("field_scale must be > 0")


_BLOCKS = {
    "grid": GridConfig,
    "maf": MafParams,
    "vrf": VrfParams,
    "rpf": RpfParams,
    "visibility": VisibilityConfig,
    "predictor": PredictorSettings,
    "ablation": AblationConfig,
    "scoring": ScoringConfig,
    "planner": PlannerConfig,
}

_TUPLE_FIELDS = {"probabilities", "r_diag", "s_diag", "accel_bounds"}


def _build_block(cls, name: str, values: dict):
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in block {name!r}: {', '.join(sorted(unknown))}")
    coerced = {k: tuple(v) if k in _TUPLE_FIELDS and v is not None else v for k, v in values.items()}
    try:
        return cls(**coerced)
    except ValueError as e:
        raise ConfigError(f"invalid {name!r} block: {e}") from e


def config_from_dict(doc: dict) -> EngineConfig:
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    unknown = set(doc) - set(_BLOCKS) - {"field_scale"}
    if unknown:
        raise ConfigError(f"unknown config block(s): {', '.join(sorted(unknown))}")
    kwargs = {
        name: _build_block(cls, name, doc.get(name) or {}) for name, cls in _BLOCKS.items()
    }
    if "field_scale" in doc:
        kwargs["field_scale"] = float(doc["field_scale"])
    return EngineConfig(**kwargs)


def config_to_dict(cfg: EngineConfig) -> dict:
    out = {}
    for name in _BLOCKS:
        block = getattr(cfg, name)
        out[name] = {
            k: (list(v) if isinstance(v, tuple) else v)
            for k, v in dataclasses.asdict(block).items()
        }
    out["field_scale"] = cfg.field_scale
    return out


def load_config(path=None) -> EngineConfig:
    """Load an engine config file (YAML); None gives all defaults."""
    if path is None:
        return EngineConfig()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: not valid YAML: {e}") from e
    return config_from_dict(doc)


def save_config(cfg: EngineConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=True)


def apply_override(doc: dict, dotted_key: str, value) -> dict:
    """Set ``block.field`` in a config dict (used by the sweep command)."""
    parts = dotted_key.split(".")
    if len(parts) != 2:
        raise ConfigError(f"override key must look like 'block.field', got {dotted_key!r}")
    block, key = parts
    out = dict(doc)
    out[block] = dict(out.get(block) or {})
    out[block][key] = value
    return out


def config_hash(cfg: EngineConfig) -> str:
    """Stable short hash of the full parameter set."""
    canon = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]

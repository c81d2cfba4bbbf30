"""Shared plain-text ``key = value`` configuration (SI units, ``#`` comments)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .device import ServoConfig, calibrated_servo
from .harness import DEFAULT_RADII
from .kinematics import DeltaGeometry
from .rendering import DEFAULT_APEX_HEIGHT, DEFAULT_CONE_ANGLE, DEFAULT_STIFFNESS
from .workspace import GridSpec


class ConfigError(ValueError):
    pass


FLOAT_KEYS = {
    # geometry
    "base_radius", "upper_arm", "forearm", "effector_radius",
    "azimuth_0", "azimuth_1", "azimuth_2", "theta_min", "theta_max",
    # servo
    "torque_limit", "max_rate", "quantization",
    # rendering
    "stiffness", "apex_height", "cone_angle",
    # workspace grid
    "ws_lateral", "ws_z_min", "ws_z_max", "ws_spacing",
    # experiment
    "height", "angular_rate", "revolutions", "sample_rate", "noise_level",
}
INT_KEYS = {"noise_seed"}
LIST_KEYS = {"radii"}


def parse_config(text: str) -> dict:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            if key in FLOAT_KEYS:
                values[key] = float(value)
            elif key in INT_KEYS:
                values[key] = int(value)
            elif key in LIST_KEYS:
                values[key] = tuple(float(v) for v in value.split(",") if v.strip())
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {value!r}") from None
        if key in FLOAT_KEYS and math.isnan(values[key]):
            raise ConfigError(f"line {lineno}: {key} is NaN")
    return values


@dataclass(frozen=True)
class ExperimentConfig:
    radii: tuple = DEFAULT_RADII
    height: float | None = None  # None: operating height from the workspace
    angular_rate: float = math.pi  # rad/s
    revolutions: float = 4.0
    sample_rate: float = 100.0
    noise_level: float = 0.0
    noise_seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    geometry: DeltaGeometry = field(default_factory=DeltaGeometry)
    servo: ServoConfig = field(default_factory=ServoConfig)
    stiffness: float = DEFAULT_STIFFNESS
    apex_height: float = DEFAULT_APEX_HEIGHT
    cone_angle: float = DEFAULT_CONE_ANGLE
    grid: GridSpec = field(default_factory=GridSpec)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    out_dir: Path = Path(".")
    seed: int = 0
    calibrate_torque: bool = True  # no torque_limit key: calibrate to the vertical datum


def build_config(values: dict, out_dir=".", seed: int | None = None) -> RunConfig:
    v = dict(values)
    geo_kw = {k: v[k] for k in ("base_radius", "upper_arm", "forearm", "effector_radius",
                                 "theta_min", "theta_max") if k in v}
    default_az = DeltaGeometry().chain_azimuths
    geo_kw["chain_azimuths"] = tuple(v.get(f"azimuth_{i}", default_az[i]) for i in range(3))
    servo_kw = {k: v[k] for k in ("max_rate", "quantization", "theta_min", "theta_max") if k in v}
    try:
        geometry = DeltaGeometry(**geo_kw)
        servo = ServoConfig(**servo_kw, torque_limit=v.get("torque_limit", math.inf))
        grid = GridSpec(
            lateral=v.get("ws_lateral", 0.05), z_min=v.get("ws_z_min", -0.09),
            z_max=v.get("ws_z_max", -0.01), spacing=v.get("ws_spacing", 0.001),
        )
        experiment = ExperimentConfig(
            radii=v.get("radii", DEFAULT_RADII),
            height=v.get("height"),
            angular_rate=v.get("angular_rate", math.pi),
            revolutions=v.get("revolutions", 4.0),
            sample_rate=v.get("sample_rate", 100.0),
            noise_level=v.get("noise_level", 0.0),
            noise_seed=seed if seed is not None else v.get("noise_seed", 0),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    stiffness = v.get("stiffness", DEFAULT_STIFFNESS)
    if not stiffness > 0:
        raise ConfigError("stiffness must be positive")
    if not (experiment.angular_rate > 0 and experiment.sample_rate > 0 and experiment.revolutions > 0):
        raise ConfigError("experiment rates must be positive")
    if any(r < 0 for r in experiment.radii) or not experiment.radii:
        raise ConfigError("radii must be a non-empty list of non-negative values")
    if experiment.noise_level < 0:
        raise ConfigError("noise_level must be non-negative")
    final_seed = experiment.noise_seed
    if not 0 <= final_seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    return RunConfig(geometry, servo, stiffness, v.get("apex_height", DEFAULT_APEX_HEIGHT),
                     v.get("cone_angle", DEFAULT_CONE_ANGLE), grid, experiment,
                     Path(out_dir), final_seed, "torque_limit" not in v)


def load_config(path=None, out_dir=".", seed: int | None = None) -> RunConfig:
    if path is None:
        return build_config({}, out_dir, seed)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return build_config(parse_config(text), out_dir, seed)


def resolved_servo(cfg: RunConfig) -> ServoConfig:
    """Servo with the torque limit calibrated when the config leaves it unset."""
    if cfg.calibrate_torque:
        return calibrated_servo(cfg.geometry, cfg.servo, cfg.grid)
    return cfg.servo

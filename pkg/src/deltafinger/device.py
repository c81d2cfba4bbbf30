"""Torque-limited servo model of the actuated device."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .kinematics import DeltaGeometry, as_vector, inverse_kinematics, jacobian
from .workspace import GridSpec, operating_height

VERTICAL_CAPABILITY = 1.8  # N, at the central operating pose


class OutOfRange(ValueError):
    pass


class Unbounded(Exception):
    pass


@dataclass(frozen=True)
class ServoConfig:
    """Per-joint actuator limits.

    ``torque_limit`` and ``max_rate`` may be infinite and ``quantization`` zero
    to describe an ideal actuator.
    """

    torque_limit: float = math.inf
    max_rate: float = 10.5  # rad/s
    quantization: float = 1.57e-3  # rad per command step
    theta_min: float = -math.pi / 2.0
    theta_max: float = math.pi / 2.0

    def __post_init__(self):
        if not self.torque_limit > 0:
            raise ValueError("torque_limit must be positive")
        if not self.max_rate > 0:
            raise ValueError("max_rate must be positive")
        if not (0.0 <= self.quantization <= 0.01):
            raise ValueError("quantization must lie in [0, 0.01] rad")
        if not self.theta_min < self.theta_max:
            raise ValueError("theta_min must be below theta_max")

    @classmethod
    def ideal(cls, theta_min=-math.pi / 2.0, theta_max=math.pi / 2.0) -> "ServoConfig":
        return cls(math.inf, math.inf, 0.0, theta_min, theta_max)

    def restrict(self, geometry: DeltaGeometry) -> DeltaGeometry:
        """Geometry whose joint limits are the intersection with the servo's."""
        lo = max(geometry.theta_min, self.theta_min)
        hi = min(geometry.theta_max, self.theta_max)
        return geometry.with_limits(lo, hi)

    def quantize(self, angles) -> np.ndarray:
        th = np.asarray(angles, dtype=float)
        if self.quantization == 0.0:
            return th.copy()
        return np.round(th / self.quantization) * self.quantization


@dataclass(frozen=True)
class DeviceState:
    current: np.ndarray
    commanded: np.ndarray
    timestamp: float = 0.0


def torque_for_force(geometry: DeltaGeometry, angles, force) -> np.ndarray:
    """Static joint torques balancing ``force`` at the effector: J^T F."""
    return jacobian(geometry, angles).T @ as_vector(force, "force")


def _peak_torque_per_newton(geometry, angles, direction) -> float:
    d = as_vector(direction, "direction")
    norm = np.linalg.norm(d)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    return float(np.max(np.abs(torque_for_force(geometry, angles, d))))


def force_capability(geometry: DeltaGeometry, angles, direction, servo: ServoConfig) -> float:
    """Largest force along ``direction`` before any joint reaches its torque limit."""
    peak = _peak_torque_per_newton(geometry, angles, direction)
    if peak < 1e-15:
        raise Unbounded("direction loads no joint")
    return servo.torque_limit / peak


def clamp_force(geometry: DeltaGeometry, angles, force, servo: ServoConfig) -> np.ndarray:
    """Scale ``force`` down, keeping its direction, until it fits the torque envelope."""
    f = as_vector(force, "force")
    if math.isinf(servo.torque_limit) or not f.any():
        return f.copy()
    peak = float(np.max(np.abs(torque_for_force(geometry, angles, f))))
    if peak <= servo.torque_limit:
        return f.copy()
    return f * (servo.torque_limit / peak)


def central_pose(geometry: DeltaGeometry, grid: GridSpec = GridSpec()) -> tuple[np.ndarray, np.ndarray]:
    """Equal-angle pose on the axis at the best workspace slice.

    Returns (angles, position).
    """
    p = np.array([0.0, 0.0, operating_height(geometry, grid)])
    return inverse_kinematics(geometry, p), p


def calibrate_torque_limit(geometry: DeltaGeometry, angles=None,
                           vertical: float = VERTICAL_CAPABILITY,
                           grid: GridSpec = GridSpec()) -> float:
    """Torque limit giving ``vertical`` newtons of capability along -z at ``angles``
    (the central pose by default)."""
    if angles is None:
        angles = central_pose(geometry, grid)[0]
    return vertical * _peak_torque_per_newton(geometry, angles, (0.0, 0.0, -1.0))


@lru_cache(maxsize=8)
def _cached_limit(geometry: DeltaGeometry, grid: GridSpec) -> float:
    return calibrate_torque_limit(geometry, grid=grid)


def calibrated_servo(geometry: DeltaGeometry, servo: ServoConfig = ServoConfig(),
                     grid: GridSpec = GridSpec()) -> ServoConfig:
    return replace(servo, torque_limit=_cached_limit(geometry, grid))


def step_command(state: DeviceState, target, dt: float, servo: ServoConfig) -> DeviceState:
    """Advance the servos by ``dt`` toward the quantized ``target``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    goal = np.clip(servo.quantize(as_vector(target, "target")), servo.theta_min, servo.theta_max)
    delta = goal - state.current
    max_step = servo.max_rate * dt
    if math.isfinite(max_step):
        delta = np.clip(delta, -max_step, max_step)
    current = np.clip(state.current + delta, servo.theta_min, servo.theta_max)
    return DeviceState(current, goal, state.timestamp + dt)


def encode_command(angles, theta_min=-math.pi / 2.0, theta_max=math.pi / 2.0) -> bytes:
    """``A c0 c1 c2\\n`` with angles in tenths of a milliradian."""
    th = as_vector(angles, "angles")
    if np.any(th < theta_min) or np.any(th > theta_max):
        raise OutOfRange(f"angles {th} outside [{theta_min}, {theta_max}]")
    counts = [int(round(10000.0 * v)) for v in th]
    return ("A " + " ".join(str(c) for c in counts) + "\n").encode("ascii")


def decode_command(line: bytes) -> np.ndarray:
    tokens = line.decode("ascii").split()
    if len(tokens) != 4 or tokens[0] != "A":
        raise ValueError(f"malformed command line: {line!r}")
    return np.array([int(s) for s in tokens[1:]], dtype=float) / 10000.0


def write_commands(sink, angle_seq, theta_min=-math.pi / 2.0, theta_max=math.pi / 2.0) -> int:
    """Write one command line per angle triple to a binary sink."""
    n = 0
    for th in angle_seq:
        sink.write(encode_command(th, theta_min, theta_max))
        n += 1
    return n

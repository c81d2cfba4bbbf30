"""Simulated force-evaluation experiment and its statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._format import fixed, fixed_rows
from .device import DeviceState, ServoConfig, clamp_force, step_command
from .kinematics import (
    DeltaGeometry,
    KinematicsError,
    as_vector,
    forward_kinematics,
    inverse_kinematics,
    jacobian,
)
from .stats import AnovaResult, one_way_anova

DEFAULT_RADII = (0.005, 0.010, 0.015, 0.020, 0.024)
# delta is only meaningful to this absolute precision.
DELTA_RESOLUTION = 1e-12


class DegenerateTrace(ValueError):
    pass


class TrajectoryUnreachable(Exception):
    def __init__(self, index: int, cause: Exception):
        super().__init__(f"sample {index} unreachable ({cause})")
        self.index = index
        self.cause = cause


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    points: np.ndarray
    radius: float
    height: float
    angular_rate: float


def circular_trajectory(radius: float, height: float, angular_rate: float,
                        duration: float, sample_rate: float) -> Trajectory:
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if not (angular_rate > 0 and duration > 0 and sample_rate > 0):
        raise ValueError("rates and duration must be positive")
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    wt = angular_rate * t
    pts = np.column_stack([radius * np.cos(wt), radius * np.sin(wt), np.full(n, float(height))])
    return Trajectory(t, pts, float(radius), float(height), float(angular_rate))


def direction_set(n: int = 24) -> np.ndarray:
    """``n`` evenly spaced unit vectors in the lateral plane, shape (n, 2)."""
    if n < 2:
        raise ValueError("need at least two directions")
    ang = 2.0 * math.pi * np.arange(n) / n
    return np.column_stack([np.cos(ang), np.sin(ang)])


@dataclass
class ForceTrace:
    t: np.ndarray
    commanded: np.ndarray
    force: np.ndarray
    achieved: np.ndarray
    angles: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.t) > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("timestamps must be strictly increasing")

    def to_csv(self, path) -> None:
        rows = fixed_rows(np.column_stack([self.t, self.commanded, self.force]))
        with open(path, "w", newline="\n") as fh:
            fh.write("t,px,py,pz,fx,fy,fz\n")
            np.savetxt(fh, rows, fmt="%.9f", delimiter=",")

    def segment(self, mask) -> "ForceTrace":
        return ForceTrace(self.t[mask], self.commanded[mask], self.force[mask],
                          self.achieved[mask], self.angles[mask], dict(self.metadata))


def run_force_experiment(geometry: DeltaGeometry, servo: ServoConfig, stiffness: float,
                         trajectory: Trajectory, anchor, noise_level: float = 0.0,
                         rng: np.random.Generator | None = None) -> ForceTrace:
    """Drive the effector along ``trajectory`` against a fixed sensor at
    ``anchor``; the delivered force is the spring force of the achieved
    displacement, clipped to the torque envelope.

    ``noise_level`` scales an optional multiplicative Gaussian channel on the
    force magnitude; it requires ``rng``.
    """
    anchor = as_vector(anchor, "anchor")
    if noise_level > 0 and rng is None:
        raise ValueError("noise injection needs a seeded generator")
    geo = servo.restrict(geometry)
    t = trajectory.t
    n = len(t)
    forces = np.empty((n, 3))
    achieved = np.empty((n, 3))
    angles = np.empty((n, 3))
    state = None
    previous = None
    for i in range(n):
        try:
            target = inverse_kinematics(geo, trajectory.points[i], previous)
        except KinematicsError as exc:
            raise TrajectoryUnreachable(i, exc) from exc
        previous = target
        if state is None:
            start = np.clip(servo.quantize(target), servo.theta_min, servo.theta_max)
            state = DeviceState(start, start, float(t[0]))
        else:
            state = step_command(state, target, float(t[i] - t[i - 1]), servo)
        try:
            pos = forward_kinematics(geometry, state.current)
            f = clamp_force(geometry, state.current, stiffness * (pos - anchor), servo)
        except KinematicsError as exc:
            raise TrajectoryUnreachable(i, exc) from exc
        achieved[i], angles[i], forces[i] = pos, state.current, f
    if noise_level > 0:
        forces *= 1.0 + noise_level * rng.standard_normal(n)[:, None]
    meta = {
        "radius": trajectory.radius,
        "height": trajectory.height,
        "angular_rate": trajectory.angular_rate,
        "stiffness": stiffness,
        "noise_level": noise_level,
        "amplitude_estimator": "(max-min)/2",
    }
    return ForceTrace(t.copy(), trajectory.points.copy(), forces, achieved, angles, meta)


def quantization_force_bound(geometry: DeltaGeometry, servo: ServoConfig, stiffness: float,
                             trace: ForceTrace) -> float:
    """Worst-case force error from command quantization along a trace:
    stiffness * max ||J||_2 * ||dtheta_q||_2, dtheta_q = q/2 on every joint."""
    qerr = math.sqrt(3.0) * servo.quantization / 2.0
    jnorm = max(np.linalg.norm(jacobian(geometry, th), 2) for th in trace.angles)
    return stiffness * jnorm * qerr


@dataclass(frozen=True)
class TraceStats:
    amplitude: np.ndarray  # per component, (max - min) / 2
    mean: np.ndarray
    lateral_amplitude: float
    delta: float
    samples: int

    def report(self) -> str:
        a, m = self.amplitude, self.mean
        lines = [
            f"samples={self.samples}",
            f"amplitude_x={fixed(a[0])}", f"amplitude_y={fixed(a[1])}",
            f"amplitude_z={fixed(a[2])}",
            f"mean_x={fixed(m[0])}", f"mean_y={fixed(m[1])}", f"mean_z={fixed(m[2])}",
            f"lateral_amplitude={fixed(self.lateral_amplitude)}",
            f"delta={fixed(self.delta)}",
        ]
        return "\n".join(lines) + "\n"

    def csv_row(self) -> str:
        vals = [*self.amplitude, *self.mean, self.lateral_amplitude, self.delta]
        return ",".join(fixed(v) for v in vals) + f",{self.samples}"

    CSV_HEADER = "amp_x,amp_y,amp_z,mean_x,mean_y,mean_z,lateral_amplitude,delta,samples"


def trace_stats(trace: ForceTrace) -> TraceStats:
    """Per-component amplitude and mean, plus the normalized lateral deviation
    delta: population std of |f_xy| / lateral amplitude, where the lateral
    amplitude is the mean of the x and y amplitudes."""
    f = np.asarray(trace.force)
    if len(f) < 3:
        raise DegenerateTrace("need at least 3 samples")
    amp = (f.max(axis=0) - f.min(axis=0)) / 2.0
    lateral = 0.5 * (amp[0] + amp[1])
    if lateral < 1e-12:
        raise DegenerateTrace("lateral force amplitude is zero")
    m = np.hypot(f[:, 0], f[:, 1]) / lateral
    return TraceStats(amp, f.mean(axis=0), float(lateral), float(m.std()), len(f))


def cycle_deltas(trace: ForceTrace) -> np.ndarray:
    """delta of every complete revolution in a circular trace."""
    w = trace.metadata["angular_rate"]
    period = 2.0 * math.pi / w
    cycle = np.floor((trace.t - trace.t[0]) / period + 1e-9).astype(int)
    out = []
    for c in range(int(cycle.max()) + 1):
        mask = cycle == c
        seg_t = trace.t[mask]
        if len(seg_t) < 3 or seg_t[-1] - seg_t[0] < period * (1.0 - 2.0 / max(len(seg_t), 1)):
            continue
        out.append(trace_stats(trace.segment(mask)).delta)
    return np.array(out)


def delta_anova(traces) -> AnovaResult:
    """ANOVA of per-revolution delta grouped by trajectory."""
    return one_way_anova([cycle_deltas(tr) for tr in traces], DELTA_RESOLUTION)

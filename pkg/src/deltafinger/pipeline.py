"""End-to-end render loop: finger position -> contact force -> clamped
device force -> effector displacement -> joint angles -> servo command."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .device import ServoConfig, clamp_force, encode_command
from .kinematics import DeltaGeometry, KinematicsError, inverse_kinematics
from .mesh import SurfaceMesh
from .rendering import (
    DEFAULT_APEX_HEIGHT,
    DEFAULT_CONE_ANGLE,
    ContactForce,
    RenderError,
    render_force,
)


@dataclass(frozen=True)
class RenderSample:
    t: float
    force: ContactForce | None  # delivered (clamped) force
    command: bytes | None
    error: Exception | None = None


def displacement_command(geometry: DeltaGeometry, servo: ServoConfig, rest, force,
                         stiffness: float) -> np.ndarray:
    """Joint angles that push the effector from ``rest`` by force/stiffness."""
    target = np.asarray(rest, dtype=float) + np.asarray(force, dtype=float) / stiffness
    return servo.quantize(inverse_kinematics(servo.restrict(geometry), target))


def render_path(mesh: SurfaceMesh, times, points, stiffness: float, geometry: DeltaGeometry,
                servo: ServoConfig, pose_angles, pose_position,
                apex_height: float = DEFAULT_APEX_HEIGHT,
                cone_angle: float = DEFAULT_CONE_ANGLE) -> list[RenderSample]:
    """Render every finger sample; failures are recorded per sample and the
    run continues."""
    out = []
    for t, p in zip(times, points):
        try:
            cf = render_force(mesh, p, stiffness, apex_height, cone_angle)
        except RenderError as exc:
            out.append(RenderSample(float(t), None, None, exc))
            continue
        delivered = clamp_force(geometry, pose_angles, cf.vector, servo)
        cf = replace(cf, vector=delivered)
        try:
            th = displacement_command(geometry, servo, pose_position, delivered, stiffness)
            cmd = encode_command(th, servo.theta_min, servo.theta_max)
        except (KinematicsError, ValueError) as exc:
            out.append(RenderSample(float(t), cf, None, exc))
            continue
        out.append(RenderSample(float(t), cf, cmd))
    return out

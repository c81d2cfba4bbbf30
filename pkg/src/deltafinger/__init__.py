"""Simulation of a wearable 3-RRR delta haptic display: kinematics,
workspace analysis, contact force rendering, a torque-limited servo model
and a force-evaluation experiment harness."""

from .kinematics import (
    DeltaGeometry,
    forward_kinematics,
    inverse_kinematics,
    jacobian,
    reachable,
)

__all__ = [
    "DeltaGeometry",
    "forward_kinematics",
    "inverse_kinematics",
    "jacobian",
    "reachable",
]
__version__ = "0.1.0"

"""Kinematics of the 3-RRR rotational delta mechanism.

Frame conventions: the base plane is z = 0 and the finger workspace lies
below it (z < 0). Each chain's shoulder sits at radius
``base_radius - effector_radius`` along its azimuth, the effector radius being
folded into the shoulder offset. A joint angle of zero points the upper arm
horizontally toward the mechanism axis; positive angles swing the elbow down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

TWO_PI = 2.0 * math.pi


class KinematicsError(Exception):
    """Base class for kinematic failures."""


class Unreachable(KinematicsError):
    def __init__(self, chain: int):
        super().__init__(f"unreachable: chain {chain}")
        self.chain = chain


class JointLimit(KinematicsError):
    def __init__(self, chain: int, theta: float):
        super().__init__(f"joint limit: chain {chain} (theta={theta:.6f})")
        self.chain = chain
        self.theta = theta


class NoIntersection(KinematicsError):
    pass


class AmbiguousAboveBase(KinematicsError):
    pass


class Singular(KinematicsError):
    pass


def as_vector(p, name="position") -> np.ndarray:
    """Validate a 3-vector; NaN and infinite components are rejected here."""
    v = np.asarray(p, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"{name} must have 3 components, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite components: {v}")
    return v


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class DeltaGeometry:
    """Dimensional parameters of the mechanism, SI units."""

    base_radius: float = 0.080
    upper_arm: float = 0.035
    forearm: float = 0.060
    effector_radius: float = 0.010
    chain_azimuths: tuple = field(default=(0.0, TWO_PI / 3.0, 2.0 * TWO_PI / 3.0))
    theta_min: float = -math.pi / 2.0
    theta_max: float = math.pi / 2.0

    def __post_init__(self):
        lengths = {
            "base_radius": self.base_radius,
            "upper_arm": self.upper_arm,
            "forearm": self.forearm,
            "effector_radius": self.effector_radius,
        }
        for name, value in lengths.items():
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be a positive finite length, got {value}")
        if self.forearm + self.upper_arm <= self.base_radius - self.effector_radius:
            raise ValueError(
                "forearm + upper_arm must exceed base_radius - effector_radius "
                "for a non-empty workspace"
            )
        az = tuple(float(a) for a in self.chain_azimuths)
        if len(az) != 3 or not all(math.isfinite(a) for a in az):
            raise ValueError("chain_azimuths must be three finite angles")
        for i in range(3):
            for j in range(i + 1, 3):
                d = (az[i] - az[j]) % TWO_PI
                if min(d, TWO_PI - d) < 1e-9:
                    raise ValueError("chain_azimuths must be pairwise distinct modulo 2*pi")
        object.__setattr__(self, "chain_azimuths", az)
        if not (math.isfinite(self.theta_min) and math.isfinite(self.theta_max)):
            raise ValueError("joint limits must be finite")
        if self.theta_min >= self.theta_max:
            raise ValueError("theta_min must be below theta_max")

    @property
    def shoulder_offset(self) -> float:
        return self.base_radius - self.effector_radius

    def with_limits(self, theta_min: float, theta_max: float) -> "DeltaGeometry":
        return replace(self, theta_min=theta_min, theta_max=theta_max)


def chain_frame(geometry: DeltaGeometry, chain_index: int, p) -> np.ndarray:
    """Express ``p`` in the local frame of one chain (shoulder at the origin,
    arm plane = local x-z plane)."""
    if chain_index not in (0, 1, 2):
        raise ValueError(f"chain_index must be 0, 1 or 2, got {chain_index}")
    local = rot_z(-geometry.chain_azimuths[chain_index]) @ as_vector(p)
    local[0] -= geometry.shoulder_offset
    return local


def _local_coords(geometry: DeltaGeometry, pts: np.ndarray):
    """Vectorised chain_frame: returns x', y', z' arrays of shape (n, 3)."""
    az = np.asarray(geometry.chain_azimuths)
    c, s = np.cos(az), np.sin(az)
    x, y, z = pts[:, 0:1], pts[:, 1:2], pts[:, 2:3]
    xl = c * x + s * y - geometry.shoulder_offset
    yl = -s * x + c * y
    zl = np.broadcast_to(z, xl.shape)
    return xl, yl, zl


def _wrap(theta):
    return (theta + math.pi) % TWO_PI - math.pi


def _chain_roots(geometry: DeltaGeometry, pts: np.ndarray):
    """Both closure roots per point and chain.

    Solves E cos(t) + F sin(t) = G. Returns (roots_a, roots_b, feasible), the
    arrays having shape (n, 3).
    """
    a, b = geometry.upper_arm, geometry.forearm
    xl, yl, zl = _local_coords(geometry, pts)
    E = 2.0 * a * xl
    F = 2.0 * a * zl
    G = b * b - a * a - (xl * xl + yl * yl + zl * zl)
    disc = E * E + F * F - G * G
    feasible = (disc >= 0.0) & ((E != 0.0) | (F != 0.0))
    phi = np.arctan2(F, E)
    half = np.arctan2(np.sqrt(np.where(feasible, disc, 0.0)), G)
    return _wrap(phi + half), _wrap(phi - half), feasible


def _select(geometry, roots_a, roots_b, previous=None):
    if previous is None:
        # Smaller elbow x in the chain frame, i.e. larger cos(theta); on a
        # tie (wrist in the shoulder plane) the elbow-up root.
        ca, cb = np.cos(roots_a), np.cos(roots_b)
        tie = np.abs(ca - cb) <= 1e-12
        pick_a = np.where(tie, roots_a <= roots_b, ca > cb)
    else:
        prev = np.broadcast_to(np.asarray(previous, dtype=float), roots_a.shape)
        pick_a = np.abs(_wrap(roots_a - prev)) <= np.abs(_wrap(roots_b - prev))
    return np.where(pick_a, roots_a, roots_b)


def solve_batch(geometry: DeltaGeometry, pts, previous=None):
    """Vectorised IK.

    Returns ``(theta, status, chain)``: theta has shape (n, 3); status is 0 for
    success, 1 for unreachable, 2 for a joint-limit violation; chain is the
    first failing chain index (or -1).
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    ra, rb, feasible = _chain_roots(geometry, pts)
    theta = _select(geometry, ra, rb, previous)
    in_limits = (theta >= geometry.theta_min) & (theta <= geometry.theta_max)
    n = pts.shape[0]
    status = np.zeros(n, dtype=np.int8)
    chain = np.full(n, -1, dtype=np.int8)
    # Chains are checked in order; the first failure wins.
    for i in (2, 1, 0):
        lim_bad = feasible[:, i] & ~in_limits[:, i]
        unreach = ~feasible[:, i]
        status = np.where(lim_bad, 2, status)
        status = np.where(unreach, 1, status)
        chain = np.where(lim_bad | unreach, i, chain)
    return theta, status, chain


def inverse_kinematics(geometry: DeltaGeometry, p, previous=None) -> np.ndarray:
    """Closed-form IK. Without ``previous`` the elbow-up root (smaller local
    x) is used; with it each chain takes the root nearest its previous angle."""
    p = as_vector(p)
    theta, status, chain = solve_batch(geometry, p[None, :], previous)
    if status[0] == 1:
        raise Unreachable(int(chain[0]))
    if status[0] == 2:
        c = int(chain[0])
        raise JointLimit(c, float(theta[0, c]))
    return theta[0]


def reachable(geometry: DeltaGeometry, p) -> bool:
    try:
        inverse_kinematics(geometry, p)
    except KinematicsError:
        return False
    return True


def reachable_mask(geometry: DeltaGeometry, pts) -> np.ndarray:
    return solve_batch(geometry, pts)[1] == 0


def elbow_points(geometry: DeltaGeometry, angles) -> np.ndarray:
    """Elbow positions in the base frame, one row per chain."""
    th = as_vector(angles, "angles")
    a = geometry.upper_arm
    out = np.empty((3, 3))
    for i, az in enumerate(geometry.chain_azimuths):
        local = np.array(
            [geometry.base_radius - a * math.cos(th[i]), 0.0, -a * math.sin(th[i])]
        )
        out[i] = rot_z(az) @ local
    return out


def _sphere_centers(geometry: DeltaGeometry, angles) -> np.ndarray:
    th = as_vector(angles, "angles")
    a = geometry.upper_arm
    out = np.empty((3, 3))
    for i, az in enumerate(geometry.chain_azimuths):
        local = np.array([geometry.shoulder_offset - a * math.cos(th[i]), 0.0, -a * math.sin(th[i])])
        out[i] = rot_z(az) @ local
    return out


def trilaterate(p1, p2, p3, radius: float, tol: float = 1e-9):
    """Both intersection points of three equal-radius spheres.

    Returns (lower, upper) ordered by z. Raises NoIntersection when the spheres
    miss each other by more than ``tol``.
    """
    d12 = p2 - p1
    d = np.linalg.norm(d12)
    if d < 1e-15:
        raise NoIntersection("coincident sphere centres")
    ex = d12 / d
    i = ex @ (p3 - p1)
    ey = p3 - p1 - i * ex
    j = np.linalg.norm(ey)
    if j < 1e-15:
        raise NoIntersection("collinear sphere centres")
    ey = ey / j
    ez = np.cross(ex, ey)
    x = d / 2.0
    y = (i * i + j * j) / (2.0 * j) - (i / j) * x
    h2 = radius * radius - x * x - y * y
    if h2 < 0.0:
        # A radius shortfall of tol changes h^2 by about 2*radius*tol.
        if h2 < -2.0 * radius * tol:
            raise NoIntersection("the three spheres share no common point")
        h2 = 0.0
    h = math.sqrt(h2)
    base = p1 + x * ex + y * ey
    s1, s2 = base + h * ez, base - h * ez
    return (s1, s2) if s1[2] <= s2[2] else (s2, s1)


def forward_kinematics(geometry: DeltaGeometry, angles) -> np.ndarray:
    """Effector position for the given joint angles (the z < 0 branch)."""
    c = _sphere_centers(geometry, angles)
    lower, _ = trilaterate(c[0], c[1], c[2], geometry.forearm)
    if lower[2] >= 0.0:
        raise AmbiguousAboveBase(f"no intersection below the base plane (z={lower[2]:.6g})")
    return lower


def closure_residuals(geometry: DeltaGeometry, angles, p) -> np.ndarray:
    """Per-chain |distance(elbow, wrist) - forearm|."""
    p = as_vector(p)
    elbows = elbow_points(geometry, angles)
    res = np.empty(3)
    for i, az in enumerate(geometry.chain_azimuths):
        wrist = p + geometry.effector_radius * np.array([math.cos(az), math.sin(az), 0.0])
        res[i] = abs(np.linalg.norm(elbows[i] - wrist) - geometry.forearm)
    return res


def jacobian(geometry: DeltaGeometry, angles, h: float = 1e-6) -> np.ndarray:
    """dp/dtheta by central differences of forward kinematics; column i is
    the derivative with respect to joint i."""
    th = as_vector(angles, "angles")
    J = np.empty((3, 3))
    for i in range(3):
        step = np.zeros(3)
        step[i] = h
        try:
            plus = forward_kinematics(geometry, th + step)
            minus = forward_kinematics(geometry, th - step)
        except KinematicsError as exc:
            raise Singular(f"forward kinematics fails near the pose: {exc}") from exc
        J[:, i] = (plus - minus) / (2.0 * h)
    return J

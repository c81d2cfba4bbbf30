"""Contact force rendering against triangle meshes.

The surface normal at a contact is not taken from the single contact facet:
three rays are cast from an apex above the contact, and the plane through
their hits (the reference plane) sets both the force direction and the
penetration depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._format import fixed
from .kinematics import as_vector
from .mesh import SurfaceMesh

DEFAULT_APEX_HEIGHT = 0.10
DEFAULT_CONE_ANGLE = math.radians(15.0)
DEFAULT_STIFFNESS = 72.0  # N/m: 0.025 m displacement -> 1.8 N


class RenderError(Exception):
    pass


class NotOnSurface(RenderError):
    pass


class PatchIncomplete(RenderError):
    def __init__(self, hits: int):
        super().__init__(f"only {hits} of 3 reference rays hit the surface")
        self.hits = hits


@dataclass(frozen=True)
class RayHit:
    t: float
    point: np.ndarray
    triangle_index: int
    normal: np.ndarray


@dataclass(frozen=True)
class ReferencePlane:
    points: np.ndarray  # (3, 3), one reference point per row
    normal: np.ndarray  # unit, toward the apex
    offset: float  # plane is {x : normal . x = offset}
    apex: np.ndarray

    def signed_distance(self, p) -> float:
        """Positive on the apex side."""
        return float(self.normal @ np.asarray(p, dtype=float) - self.offset)

    @property
    def footprint_diameter(self) -> float:
        """Diameter of the circle through the three reference points."""
        a, b, c = self.points
        ab, bc, ca = np.linalg.norm(b - a), np.linalg.norm(c - b), np.linalg.norm(a - c)
        area2 = np.linalg.norm(np.cross(b - a, c - a))
        return float(2.0 * ab * bc * ca / (2.0 * area2))


@dataclass(frozen=True)
class ContactForce:
    vector: np.ndarray
    penetration: float
    contact: bool
    plane: Optional[ReferencePlane] = None


def _bbox_hit(mesh: SurfaceMesh, origin, direction) -> bool:
    lo, hi = mesh.bbox
    pad = 1e-9 * max(1.0, float(np.max(np.abs(hi - lo))))
    lo, hi = lo - pad, hi + pad
    t0, t1 = 0.0, math.inf
    for k in range(3):
        if abs(direction[k]) < 1e-300:
            if origin[k] < lo[k] or origin[k] > hi[k]:
                return False
            continue
        ta = (lo[k] - origin[k]) / direction[k]
        tb = (hi[k] - origin[k]) / direction[k]
        if ta > tb:
            ta, tb = tb, ta
        t0, t1 = max(t0, ta), min(t1, tb)
        if t0 > t1:
            return False
    return True


def ray_cast(mesh: SurfaceMesh, origin, direction) -> Optional[RayHit]:
    """Nearest ray/triangle hit (Moller-Trumbore, two-sided) or None."""
    o = as_vector(origin, "origin")
    d = as_vector(direction, "direction")
    if abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise ValueError("ray direction must be a unit vector")
    if not _bbox_hit(mesh, o, d):
        return None
    a, b, c = mesh.corners
    e1 = b - a
    e2 = c - a
    pvec = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > 1e-300
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    s = o - a
    u = np.einsum("ij,ij->i", s, pvec) * inv
    q = np.cross(s, e1)
    v = (q @ d) * inv
    t = np.einsum("ij,ij->i", e2, q) * inv
    # Relative slack so rays through shared edges are not lost to rounding.
    eps = 1e-12
    valid = ok & (u >= -eps) & (v >= -eps) & (u + v <= 1.0 + eps) & (t > 1e-12)
    if not valid.any():
        return None
    idx = np.flatnonzero(valid)
    k = int(idx[np.argmin(t[idx])])
    tk = float(t[k])
    return RayHit(tk, o + tk * d, k, mesh.normals[k].copy())


def closest_points(mesh: SurfaceMesh, p) -> tuple[np.ndarray, np.ndarray]:
    """Closest point on every triangle to ``p`` and its distance."""
    p = np.asarray(p, dtype=float)
    a, b, c = mesh.corners
    n = mesh.normals
    # Projection onto the supporting plane, kept if it falls inside.
    proj = p - np.einsum("ij,ij->i", p - a, n)[:, None] * n
    v0, v1, v2 = b - a, c - a, proj - a
    d00 = np.einsum("ij,ij->i", v0, v0)
    d01 = np.einsum("ij,ij->i", v0, v1)
    d11 = np.einsum("ij,ij->i", v1, v1)
    d20 = np.einsum("ij,ij->i", v2, v0)
    d21 = np.einsum("ij,ij->i", v2, v1)
    den = d00 * d11 - d01 * d01
    bv = (d11 * d20 - d01 * d21) / den
    bw = (d00 * d21 - d01 * d20) / den
    inside = (bv >= 0) & (bw >= 0) & (bv + bw <= 1)

    best = proj.copy()
    best_d = np.where(inside, np.linalg.norm(p - proj, axis=1), np.inf)
    for s0, s1 in ((a, b), (b, c), (c, a)):
        e = s1 - s0
        tt = np.clip(np.einsum("ij,ij->i", p - s0, e) / np.einsum("ij,ij->i", e, e), 0.0, 1.0)
        cand = s0 + tt[:, None] * e
        dist = np.linalg.norm(p - cand, axis=1)
        better = ~inside & (dist < best_d)
        best[better] = cand[better]
        best_d = np.where(better, dist, best_d)
    return best, best_d


def closest_point(mesh: SurfaceMesh, p) -> tuple[np.ndarray, int, float]:
    pts, dist = closest_points(mesh, as_vector(p))
    k = int(np.argmin(dist))
    return pts[k], k, float(dist[k])


def surface_normal_at(mesh: SurfaceMesh, p, tol: float = 1e-6) -> np.ndarray:
    _, k, dist = closest_point(mesh, p)
    if dist > tol:
        raise NotOnSurface(f"point is {dist:.3g} m from the surface")
    return mesh.normals[k].copy()


def _perpendicular_basis(n: np.ndarray):
    helper = np.eye(3)[int(np.argmin(np.abs(n)))]
    u = np.cross(n, helper)
    u /= np.linalg.norm(u)
    return u, np.cross(n, u)


def reference_plane(mesh: SurfaceMesh, contact, apex_height: float = DEFAULT_APEX_HEIGHT,
                    cone_angle: float = DEFAULT_CONE_ANGLE) -> ReferencePlane:
    contact = as_vector(contact, "contact")
    n = surface_normal_at(mesh, contact)
    apex = contact + apex_height * n
    u, w = _perpendicular_basis(n)
    ca, sa = math.cos(cone_angle), math.sin(cone_angle)
    hits = []
    for k in range(3):
        az = 2.0 * math.pi * k / 3.0
        d = -ca * n + sa * (math.cos(az) * u + math.sin(az) * w)
        hit = ray_cast(mesh, apex, d / np.linalg.norm(d))
        if hit is not None:
            hits.append(hit.point)
    if len(hits) < 3:
        raise PatchIncomplete(len(hits))
    pts = np.array(hits)
    normal = np.cross(pts[1] - pts[0], pts[2] - pts[0])
    length = np.linalg.norm(normal)
    if length == 0.0:
        raise PatchIncomplete(3)
    normal /= length
    if normal @ (apex - pts[0]) < 0.0:
        normal = -normal
    return ReferencePlane(pts, normal, float(normal @ pts[0]), apex)


def render_force(mesh: SurfaceMesh, finger, stiffness: float = DEFAULT_STIFFNESS,
                 apex_height: float = DEFAULT_APEX_HEIGHT,
                 cone_angle: float = DEFAULT_CONE_ANGLE) -> ContactForce:
    """Spring force from the reference plane built at the finger's closest
    surface point. Stateless: the plane is rebuilt on every call."""
    if not stiffness > 0:
        raise ValueError("stiffness must be positive")
    finger = as_vector(finger, "finger")
    if len(mesh) == 0:
        raise NotOnSurface("empty mesh")
    contact, _, _ = closest_point(mesh, finger)
    plane = reference_plane(mesh, contact, apex_height, cone_angle)
    depth = -plane.signed_distance(finger)
    if depth > 0.0:
        return ContactForce(stiffness * depth * plane.normal, depth, True, plane)
    return ContactForce(np.zeros(3), depth, False, plane)


def write_contact_csv(path, times, forces) -> None:
    """``forces`` items are ContactForce or an exception for failed samples."""
    with open(path, "w", newline="\n") as fh:
        fh.write("t,fx,fy,fz,penetration,contact\n")
        for t, f in zip(times, forces):
            if isinstance(f, Exception):
                fh.write(f"{fixed(t)},nan,nan,nan,nan,error:{type(f).__name__}\n")
            else:
                v = f.vector
                fh.write(
                    f"{fixed(t)},{fixed(v[0])},{fixed(v[1])},{fixed(v[2])},{fixed(f.penetration)},"
                    f"{int(f.contact)}\n"
                )

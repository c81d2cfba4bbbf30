"""Triangle meshes: validation, loaders and a few generators."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ._format import fixed


class MeshError(Exception):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """Immutable triangle soup with per-triangle outward unit normals.

    Normals follow the right-hand rule on vertex order unless supplied.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray = field(default=None)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(-1, 3)
        t = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(v)):
            raise MeshError("non-finite vertex coordinates")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshError("triangle index out of range")
        a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
        cross = np.cross(b - a, c - a)
        area2 = np.linalg.norm(cross, axis=1)
        scale = np.maximum(np.linalg.norm(b - a, axis=1), np.linalg.norm(c - a, axis=1))
        bad = np.flatnonzero(area2 <= 1e-12 * scale**2)
        if bad.size:
            raise MeshError(f"degenerate (zero-area) triangle {int(bad[0])}")
        if self.normals is None:
            n = cross / area2[:, None]
        else:
            n = np.array(self.normals, dtype=float).reshape(-1, 3)
            if n.shape != t.shape:
                raise MeshError("normals must match the triangle count")
            n = n / np.linalg.norm(n, axis=1)[:, None]
        for arr in (v, t, n):
            arr.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "normals", n)
        object.__setattr__(self, "corners", (a, b, c))
        object.__setattr__(self, "bbox", (v.min(axis=0), v.max(axis=0)))

    def __len__(self):
        return len(self.triangles)

    def is_closed(self) -> bool:
        edges = Counter()
        for tri in self.triangles:
            for i in range(3):
                u, w = int(tri[i]), int(tri[(i + 1) % 3])
                edges[(min(u, w), max(u, w))] += 1
        return bool(edges) and all(count == 2 for count in edges.values())

    def check_winding(self) -> None:
        """Raise MeshError if a closed mesh has inconsistently wound faces
        (some directed edge used twice)."""
        if not self.is_closed():
            return
        directed = Counter()
        for tri in self.triangles:
            for i in range(3):
                directed[(int(tri[i]), int(tri[(i + 1) % 3]))] += 1
        dup = [e for e, n in directed.items() if n > 1]
        if dup:
            raise MeshError(f"inconsistent triangle winding at edge {dup[0]}")

    def centroids(self) -> np.ndarray:
        a, b, c = self.corners
        return (a + b + c) / 3.0


def _validated(vertices, triangles, normals=None) -> SurfaceMesh:
    mesh = SurfaceMesh(vertices, triangles, normals)
    mesh.check_winding()
    return mesh


def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def parse_off(text: str) -> SurfaceMesh:
    lines = list(_content_lines(text))
    if not lines:
        raise MeshError("empty OFF file", 1)
    lineno, first = lines[0]
    tokens = first.split()
    if tokens[0] != "OFF":
        raise MeshError("missing OFF header", lineno)
    tokens = tokens[1:]
    pos = 1
    if not tokens:
        if len(lines) < 2:
            raise MeshError("missing element counts", lineno)
        lineno, rest = lines[1]
        tokens = rest.split()
        pos = 2
    try:
        nv, nf = int(tokens[0]), int(tokens[1])
    except (ValueError, IndexError):
        raise MeshError("bad element counts", lineno) from None
    if len(lines) < pos + nv + nf:
        last = lines[-1][0]
        raise MeshError("file ends before all vertices and faces were read", last)
    verts = []
    for lineno, line in lines[pos:pos + nv]:
        try:
            xyz = [float(s) for s in line.split()[:3]]
        except ValueError:
            raise MeshError("bad vertex", lineno) from None
        if len(xyz) != 3:
            raise MeshError("vertex needs 3 coordinates", lineno)
        verts.append(xyz)
    tris = []
    for lineno, line in lines[pos + nv:pos + nv + nf]:
        try:
            items = [int(s) for s in line.split()]
        except ValueError:
            raise MeshError("bad face", lineno) from None
        if not items or len(items) < items[0] + 1 or items[0] < 3:
            raise MeshError("bad face vertex count", lineno)
        idx = items[1:items[0] + 1]
        if min(idx) < 0 or max(idx) >= nv:
            raise MeshError("face index out of range", lineno)
        # Fan-triangulate polygons.
        for k in range(1, len(idx) - 1):
            tris.append((idx[0], idx[k], idx[k + 1]))
    return _validated(np.array(verts), np.array(tris))


def parse_stl_ascii(text: str) -> SurfaceMesh:
    """Minimal ASCII STL reader. Coincident vertices are merged so that
    winding can be checked; facet normals in the file are ignored."""
    index: dict = {}
    verts: list = []
    tris: list = []
    current: list = []
    seen_solid = False
    for lineno, line in _content_lines(text):
        tokens = line.split()
        key = tokens[0].lower()
        if key == "solid":
            seen_solid = True
        elif not seen_solid:
            raise MeshError("missing 'solid' header", lineno)
        elif key == "vertex":
            try:
                xyz = tuple(float(s) for s in tokens[1:4])
            except ValueError:
                raise MeshError("bad vertex", lineno) from None
            if len(xyz) != 3:
                raise MeshError("vertex needs 3 coordinates", lineno)
            if xyz not in index:
                index[xyz] = len(verts)
                verts.append(xyz)
            current.append(index[xyz])
        elif key == "endloop":
            if len(current) != 3:
                raise MeshError("facet loop must have exactly 3 vertices", lineno)
            tris.append(tuple(current))
            current = []
        elif key in ("facet", "outer", "endfacet", "endsolid"):
            continue
        else:
            raise MeshError(f"unexpected token {tokens[0]!r}", lineno)
    if not tris:
        raise MeshError("no facets found", 1)
    return _validated(np.array(verts), np.array(tris))


def load_mesh(path) -> SurfaceMesh:
    with open(path) as fh:
        text = fh.read()
    head = text.lstrip()[:5].lower()
    if head.startswith("off"):
        return parse_off(text)
    if head.startswith("solid"):
        return parse_stl_ascii(text)
    raise MeshError("unrecognised mesh format (expected OFF or ASCII STL)", 1)


def write_off(mesh: SurfaceMesh, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"OFF\n{len(mesh.vertices)} {len(mesh.triangles)} 0\n")
        for v in mesh.vertices:
            fh.write(" ".join(fixed(c) for c in v) + "\n")
        for t in mesh.triangles:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")


def plane_mesh(half_size: float = 1.0, z: float = 0.0) -> SurfaceMesh:
    """Square in the plane z = const, normal +z, two triangles."""
    h = half_size
    verts = [(-h, -h, z), (h, -h, z), (h, h, z), (-h, h, z)]
    return SurfaceMesh(np.array(verts), np.array([(0, 1, 2), (0, 2, 3)]))


def icosphere(radius: float = 0.1, level: int = 3, center=(0.0, 0.0, 0.0)) -> SurfaceMesh:
    """Subdivided icosahedron with outward winding."""
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    for _ in range(level):
        cache: dict = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    v = np.array(verts) * radius + np.asarray(center, dtype=float)
    return SurfaceMesh(v, np.array(faces))

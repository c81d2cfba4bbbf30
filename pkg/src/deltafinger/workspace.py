"""Grid sampling of the reachable workspace."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._format import fixed_rows
from .kinematics import DeltaGeometry, reachable_mask


class EmptyWorkspace(Exception):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned sampling grid. Cell centres are integer multiples of
    ``spacing`` so the mechanism axis is always a cell centre."""

    lateral: float = 0.05
    z_min: float = -0.09
    z_max: float = -0.01
    spacing: float = 0.001

    def __post_init__(self):
        if not self.spacing > 0:
            raise ValueError("grid spacing must be positive")
        if self.lateral < 0 or self.z_min > self.z_max:
            raise ValueError("invalid grid extents")

    @property
    def lateral_cells(self) -> int:
        return int(round(self.lateral / self.spacing))

    def axes(self):
        n = self.lateral_cells
        lat = np.arange(-n, n + 1) * self.spacing
        k0 = int(round(self.z_min / self.spacing))
        k1 = int(round(self.z_max / self.spacing))
        z = np.arange(k0, k1 + 1) * self.spacing
        return lat, lat.copy(), z


@dataclass
class WorkspaceMap:
    grid: GridSpec
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    reachable: np.ndarray  # bool, shape (nx, ny, nz)
    slice_radius: np.ndarray  # inscribed disc radius per z slice
    z0: float
    disc_radius: float

    def to_csv(self, path) -> None:
        X, Y, Z = np.meshgrid(self.x, self.y, self.z, indexing="ij")
        rows = fixed_rows(
            np.column_stack([X.ravel(), Y.ravel(), Z.ravel(), self.reachable.ravel()])
        )
        with open(path, "w", newline="\n") as fh:
            fh.write("x,y,z,reachable\n")
            np.savetxt(fh, rows, fmt=["%.9f", "%.9f", "%.9f", "%d"], delimiter=",")


def inscribed_disc_radius(x, y, mask: np.ndarray, spacing: float, limit: float) -> float:
    """Largest axis-centred disc covered entirely by reachable cells.

    Each sample is treated as a square cell of side ``spacing``; the disc stops
    at the nearest point of the nearest unreachable cell. ``limit`` caps the
    result at the grid edge.
    """
    X, Y = np.meshgrid(x, y, indexing="ij")
    half = spacing / 2.0
    dx = np.maximum(np.abs(X) - half, 0.0)
    dy = np.maximum(np.abs(Y) - half, 0.0)
    near = np.hypot(dx, dy)
    blocked = near[~mask]
    if blocked.size == 0:
        return limit
    return float(min(blocked.min(), limit))


def workspace_sample(geometry: DeltaGeometry, grid: GridSpec = GridSpec()) -> WorkspaceMap:
    x, y, z = grid.axes()
    X, Y, Z = np.meshgrid(x, y, z, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    mask = reachable_mask(geometry, pts).reshape(X.shape)
    if not mask.any():
        raise EmptyWorkspace("no grid cell is reachable")
    limit = grid.lateral_cells * grid.spacing + grid.spacing / 2.0
    radii = np.array(
        [inscribed_disc_radius(x, y, mask[:, :, k], grid.spacing, limit) for k in range(len(z))]
    )
    k0 = int(np.argmax(radii))
    return WorkspaceMap(grid, x, y, z, mask, radii, float(z[k0]), float(radii[k0]))


@lru_cache(maxsize=8)
def operating_height(geometry: DeltaGeometry, grid: GridSpec = GridSpec()) -> float:
    """Height z0 of the slice with the largest inscribed lateral disc."""
    return workspace_sample(geometry, grid).z0

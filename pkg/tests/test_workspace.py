import numpy as np
import pytest

from deltafinger.kinematics import DeltaGeometry, reachable
from deltafinger.workspace import (
    EmptyWorkspace,
    GridSpec,
    inscribed_disc_radius,
    operating_height,
    workspace_sample,
)

from .oracles import ray_scan_radius

GEO = DeltaGeometry()
# Passes the constructor (arms just reach past the shoulder offset) but
# cannot get anywhere near the sampled heights.
TINY = DeltaGeometry(base_radius=0.0105, upper_arm=0.001, forearm=0.001, effector_radius=0.010)


@pytest.fixture(scope="module")
def coarse():
    return workspace_sample(GEO, GridSpec(lateral=0.04, z_min=-0.07, z_max=-0.01, spacing=0.002))


def test_grid_axes_hit_axis_exactly():
    x, y, z = GridSpec().axes()
    assert 0.0 in x and len(x) == 101 and len(z) == 81
    assert z[0] == pytest.approx(-0.09) and z[-1] == pytest.approx(-0.01)


def test_cells_match_pointwise_ik(coarse):
    rng = np.random.default_rng(5)
    for _ in range(300):
        i, j, k = (rng.integers(n) for n in coarse.reachable.shape)
        p = (coarse.x[i], coarse.y[j], coarse.z[k])
        assert coarse.reachable[i, j, k] == reachable(GEO, p)


def test_disc_radius_matches_ray_scan(coarse):
    oracle = ray_scan_radius(lambda p: reachable(GEO, p), coarse.z0, n_rays=360)
    s = coarse.grid.spacing
    # Cells are treated as squares, so the grid radius can only undershoot,
    # by at most one cell diagonal.
    assert oracle - np.sqrt(2) * s <= coarse.disc_radius <= oracle + 1e-9


def test_slice_radius_profile_has_interior_peak(coarse):
    assert coarse.slice_radius.max() == coarse.disc_radius
    assert coarse.slice_radius[0] < coarse.disc_radius


def test_inscribed_disc_simple_mask():
    x = y = np.arange(-3, 4) * 1.0
    X, Y = np.meshgrid(x, y, indexing="ij")
    mask = np.hypot(X, Y) <= 2.0
    # Nearest blocked cell is (2, 1) or (3, 0): nearest point 1.5 and 2.5 away in x.
    assert inscribed_disc_radius(x, y, mask, 1.0, 10.0) == pytest.approx(np.hypot(1.5, 0.5))


def test_all_reachable_slice_capped_by_grid():
    x = y = np.arange(-2, 3) * 1.0
    assert inscribed_disc_radius(x, y, np.ones((5, 5), bool), 1.0, 2.5) == 2.5


def test_empty_workspace():
    with pytest.raises(EmptyWorkspace):
        workspace_sample(TINY, GridSpec())


def test_csv_export(tmp_path):
    grid = GridSpec(lateral=0.002, z_min=-0.041, z_max=-0.040, spacing=0.001)
    ws = workspace_sample(GEO, grid)
    path = tmp_path / "ws.csv"
    ws.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,z,reachable"
    assert len(lines) == 1 + 5 * 5 * 2
    assert lines[1] == "-0.002000000,-0.002000000,-0.041000000,1"


def test_operating_height_is_best_slice():
    grid = GridSpec(lateral=0.04, z_min=-0.07, z_max=-0.01, spacing=0.002)
    assert operating_height(GEO, grid) == workspace_sample(GEO, grid).z0

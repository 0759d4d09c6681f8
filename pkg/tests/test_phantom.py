import os

import numpy as np
import pytest

from src.config.config import HullScanConfig
from src.core.errors import ConfigError, PreconditionError
from src.core.modules.geometry import GridSpec
from src.core.modules.phantom import (DEFAULT_PHANTOM_GRID, EllipseRegion, PhantomSpec, default_neo_spec,
                                      load_phantom_spec, rasterize_phantom, save_phantom_spec, true_hull,
                                      truth_on_grid)
from src.core.modules.volumes import RSPGrid
from tests.conftest import disk_spec


def center_count(grid: GridSpec, a: float, b: float) -> int:
    x, y = np.meshgrid(grid.voxel_centers(0), grid.voxel_centers(1))
    count = 0
    for xi, yi in zip(x.ravel(), y.ravel()):
        if xi * xi / (a * a) + yi * yi / (b * b) <= 1.0:
            count += 1
    return count


def test_disk_matches_center_containment_count():
    grid = GridSpec.centered(40, 40, 1)
    rsp = rasterize_phantom(disk_spec(grid, 10.0))
    assert np.count_nonzero(rsp.data) == center_count(grid, 10.0, 10.0)
    assert abs(np.count_nonzero(rsp.data) - np.pi * 100) < 15


def test_empty_phantom_is_all_zero():
    grid = GridSpec.centered(10, 10, 2)
    rsp = rasterize_phantom(PhantomSpec(grid, []))
    assert not rsp.data.any()
    assert true_hull(rsp).count() == 0


def test_default_neo_values_and_slice_count():
    spec = default_neo_spec()
    rsp = rasterize_phantom(spec)
    assert set(np.unique(rsp.data).tolist()) == {0.0, 0.9, 1.04, 1.6}
    hull = true_hull(rsp)
    for iz in (0, DEFAULT_PHANTOM_GRID.nz // 2, DEFAULT_PHANTOM_GRID.nz - 1):
        assert hull.count(iz) == 15336
    assert hull.count(0) == center_count(DEFAULT_PHANTOM_GRID, 62.81, 77.7)


def test_default_neo_regions_are_nested():
    rsp = rasterize_phantom(default_neo_spec()).slice(0)
    ventricles = rsp == 0.9
    brain = (rsp == 1.04) | ventricles
    hull = rsp > 0
    assert ventricles.any()
    assert not (ventricles & ~brain).any()
    assert not (brain & ~hull).any()
    assert np.count_nonzero(rsp == 1.6) > 0


def test_higher_priority_paints_over_lower():
    grid = GridSpec.centered(20, 20, 1)
    inner_first = PhantomSpec(grid, [
        EllipseRegion((0.0, 0.0), 3.0, 3.0, 0.5, priority=2),
        EllipseRegion((0.0, 0.0), 8.0, 8.0, 1.0, priority=1),
    ])
    rsp = rasterize_phantom(inner_first).slice(0)
    assert rsp[10, 10] == 0.5
    assert rsp[10, 15] == 1.0


def test_z_range_limits_region_to_slices():
    grid = GridSpec.centered(20, 20, 4)
    spec = PhantomSpec(grid, [EllipseRegion((0.0, 0.0), 5.0, 5.0, 1.0, z_range=(0.0, 2.0))])
    hull = true_hull(rasterize_phantom(spec))
    assert [hull.count(iz) for iz in range(4)] == [0, 0, hull.count(2), hull.count(3)]
    assert hull.count(2) > 0


def test_truth_on_coarser_grid_keeps_the_outline():
    spec = default_neo_spec()
    grid = GridSpec(200, 200, 8, 1.0, 1.0, 3.0, (-100.0, -100.0, -12.0))
    truth = truth_on_grid(spec, grid)
    assert truth.grid == grid
    assert all(truth.count(iz) == 15336 for iz in range(8))


def test_sinus_is_inside_the_hull_but_below_fbp_threshold():
    rsp = rasterize_phantom(default_neo_spec(extended=True)).slice(0)
    sinus = rsp == 0.2
    assert sinus.any()
    assert np.array_equal(rsp > 0, rasterize_phantom(default_neo_spec()).slice(0) > 0)


def test_phantom_json_round_trip(tmp_path):
    spec = default_neo_spec(extended=True)
    path = tmp_path / "neo.json"
    save_phantom_spec(spec, str(path))
    loaded = load_phantom_spec(str(path))
    assert loaded == spec
    np.testing.assert_array_equal(rasterize_phantom(loaded).data, rasterize_phantom(spec).data)


def test_shipped_phantom_matches_default_spec():
    loaded = load_phantom_spec(os.path.join(HullScanConfig.SHIPPED_CONFIG_DIR, "neo_phantom.json"))
    np.testing.assert_array_equal(rasterize_phantom(loaded).data,
                                  rasterize_phantom(default_neo_spec()).data)


def test_invalid_phantom_file_is_a_config_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"regions": [{"semi_axis_a": -1, "semi_axis_b": 2, "rsp": 1}]}')
    with pytest.raises(ConfigError):
        load_phantom_spec(str(path))


def test_invalid_region_is_rejected():
    with pytest.raises(PreconditionError):
        EllipseRegion((0.0, 0.0), 0.0, 1.0, 1.0)
    with pytest.raises(PreconditionError):
        EllipseRegion((0.0, 0.0), 1.0, 1.0, -0.5)


def test_clipped_region_only_warns(caplog):
    grid = GridSpec.centered(10, 10, 1)
    spec = PhantomSpec(grid, [EllipseRegion((0.0, 0.0), 8.0, 3.0, 1.0, name="wide")])
    rsp = rasterize_phantom(spec)
    assert isinstance(rsp, RSPGrid)
    assert "wide" in caplog.text

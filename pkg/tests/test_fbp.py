import numpy as np
import pytest

from src.config.models import AlgorithmThresholdsModel, BinningConfigModel, ScanConfigModel, ScatterModel
from src.core.errors import InsufficientCoverageError
from src.core.modules.fbp import (Sinogram, build_sinogram, fbp_hull, fbp_reconstruct, shepp_logan_filter,
                                  shepp_logan_kernel)
from src.core.modules.geometry import GridSpec
from src.core.modules.phantom import rasterize_phantom
from src.core.modules.preprocessing import apply_data_cuts, bin_histories
from src.core.modules.simulator import HistoryBatch, generate_histories
from src.core.modules.volumes import RSPGrid
from tests.conftest import disk_spec, make_batch

CFG = BinningConfigModel()


def synthetic_sinogram(values: np.ndarray, first_lateral: int = -20) -> Sinogram:
    return Sinogram(CFG, values, np.ones(values.shape, dtype=bool), first_lateral=first_lateral)


def test_kernel_center_value():
    tau = 0.5
    h = shepp_logan_kernel(5, tau)
    assert len(h) == 9
    assert h[4] == pytest.approx(2.0 / (np.pi ** 2 * tau ** 2))
    assert h[3] == h[5] == pytest.approx(-2.0 / (3.0 * np.pi ** 2 * tau ** 2))


def test_filter_impulse_response():
    size, k, tau = 12, 5, 1.0
    impulse = np.zeros(size)
    impulse[k] = 1.0
    n = np.arange(size) - k
    expected = -2.0 / (np.pi ** 2 * tau ** 2 * (4.0 * n * n - 1.0))
    np.testing.assert_allclose(shepp_logan_filter(impulse, tau), expected)


def test_filter_of_zero_profile_is_zero():
    assert not shepp_logan_filter(np.zeros(16), 1.0).any()


def test_reconstruction_is_linear():
    rng = np.random.default_rng(0)
    grid = GridSpec.centered(32, 32, 1, slice_thickness=5.0)
    s1 = synthetic_sinogram(rng.uniform(0.0, 30.0, (90, 1, 40)))
    s2 = synthetic_sinogram(rng.uniform(0.0, 30.0, (90, 1, 40)))
    a, b = 0.7, -1.3
    combined = fbp_reconstruct(s1.combine(a, s2, b), grid).data
    separate = a * fbp_reconstruct(s1, grid).data + b * fbp_reconstruct(s2, grid, threads=2).data
    np.testing.assert_allclose(combined, separate, atol=1e-9 * np.abs(separate).max())


def test_more_than_one_missing_view_is_rejected():
    grid = GridSpec.centered(16, 16, 1, slice_thickness=5.0)
    sino = synthetic_sinogram(np.ones((90, 1, 20)), first_lateral=-10)
    sino.covered[3] = False
    fbp_reconstruct(sino, grid)
    sino.covered[40] = False
    with pytest.raises(InsufficientCoverageError) as excinfo:
        fbp_reconstruct(sino, grid)
    assert excinfo.value.exit_code == 5


def test_slice_outside_the_sinogram_levels_is_zero():
    grid = GridSpec(16, 16, 1, 1.0, 1.0, 1.0, (-8.0, -8.0, 12.0))
    recon = fbp_reconstruct(synthetic_sinogram(np.ones((90, 1, 20)), first_lateral=-10), grid)
    assert not recon.data.any()


def test_build_sinogram_places_bin_means():
    batch = HistoryBatch.concatenate([
        make_batch([[-150.0, 0.5, 0.5]], [[150.0, 0.5, 0.5]], wepl=2.0),
        make_batch([[-150.0, 2.5, 0.5]], [[150.0, 2.5, 0.5]], wepl=4.0),
    ])
    sino = build_sinogram(bin_histories(batch, CFG))
    assert sino.values.shape == (90, 1, 3)
    assert sino.values[0, 0].tolist() == [2.0, 0.0, 4.0]
    assert sino.covered[0, 0].tolist() == [True, False, True]
    assert sino.lateral_centers.tolist() == [0.5, 1.5, 2.5]
    assert sino.notes
    assert len(sino.missing_views()) == 89


def test_empty_bins_give_an_empty_sinogram():
    sino = build_sinogram(bin_histories(HistoryBatch(), CFG))
    assert sino.num_views == 90
    assert sino.notes
    with pytest.raises(InsufficientCoverageError):
        fbp_reconstruct(sino, GridSpec.centered(8, 8, 1))


def test_fbp_hull_threshold_is_inclusive():
    grid = GridSpec(3, 1, 1)
    recon = RSPGrid(grid, np.array([[[0.59, 0.6, 0.61]]]))
    assert fbp_hull(recon, AlgorithmThresholdsModel()).data.ravel().tolist() == [0, 1, 1]


def test_disk_reconstruction_fidelity():
    sim_grid = GridSpec.centered(120, 120, 4)
    rsp = rasterize_phantom(disk_spec(sim_grid, 50.0, rsp=1.0))
    scan = ScanConfigModel(protons_per_projection=2048, field_width=120.0, field_height=4.0,
                           scatter=ScatterModel(enabled=False), seed=3)
    survivors, bins = apply_data_cuts(bin_histories(generate_histories(rsp, scan, threads=2), CFG))
    assert len(survivors) > 0

    recon_grid = GridSpec(120, 120, 1, 1.0, 1.0, 1.0, (-60.0, -60.0, 0.0))
    recon = fbp_reconstruct(build_sinogram(bins), recon_grid, threads=2)
    x, y = np.meshgrid(recon_grid.voxel_centers(0), recon_grid.voxel_centers(1))
    r = np.hypot(x, y)
    image = recon.slice(0)
    assert abs(image[r <= 45.0].mean() - 1.0) < 0.1

    hull = fbp_hull(recon, AlgorithmThresholdsModel()).slice(0)
    assert hull[r <= 45.0].all()
    assert not hull[r >= 53.0].any()

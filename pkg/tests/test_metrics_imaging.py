import numpy as np
import pytest

from src.core.errors import BadMagicError, GridMismatchError, PreconditionError, TruncatedFileError
from src.core.modules import parallel
from src.core.modules.geometry import GridSpec
from src.core.modules.history_io import HEADER_SIZE, write_histories
from src.core.modules.imaging import export_slice_image, read_mask, to_gray_levels, write_mask
from src.core.modules.metrics import compare_hulls
from src.core.modules.simulator import HistoryBatch
from src.core.modules.volumes import HullMask

GRID = GridSpec.centered(9, 7, 3)


def random_mask(seed: int, grid: GridSpec = GRID) -> HullMask:
    rng = np.random.default_rng(seed)
    return HullMask(grid, (rng.random(grid.shape) < 0.5).astype(np.uint8))


def test_comparison_matches_voxel_loop():
    truth, approx = random_mask(0), random_mask(1)
    missing = extra = 0
    for value_h, value_a in zip(truth.data.ravel(), approx.data.ravel()):
        missing += int(value_h == 1 and value_a == 0)
        extra += int(value_h == 0 and value_a == 1)
    result = compare_hulls(truth, approx)
    assert (result.missing, result.extra) == (missing, extra)
    assert result.missing_per_slice.sum() == missing
    assert result.approx_count == approx.count()


def test_comparison_is_symmetric():
    a, b = random_mask(2), random_mask(3)
    ab, ba = compare_hulls(a, b), compare_hulls(b, a)
    assert (ab.missing, ab.extra) == (ba.extra, ba.missing)


def test_identical_masks():
    mask = random_mask(4)
    result = compare_hulls(mask, mask)
    assert result.identical
    assert result.to_dict()["missing_per_slice"] == [0, 0, 0]


def test_one_extra_voxel():
    truth = random_mask(5)
    approx = HullMask(GRID, truth.data.copy())
    flat = np.flatnonzero(truth.data.ravel() == 0)[0]
    approx.data.ravel()[flat] = 1
    result = compare_hulls(truth, approx)
    assert (result.missing, result.extra) == (0, 1)


def test_grid_mismatch():
    with pytest.raises(GridMismatchError) as excinfo:
        compare_hulls(random_mask(0), random_mask(0, GridSpec.centered(9, 7, 2)))
    assert excinfo.value.exit_code == 4


def test_mask_rejects_values_above_one():
    with pytest.raises(PreconditionError):
        HullMask(GridSpec(2, 1, 1), np.array([[[0, 2]]], dtype=np.uint8))


def test_gray_levels_and_pgm_bytes(tmp_path):
    values = np.array([[0.0, 0.5, 0.5, 1.0]])
    assert to_gray_levels(values, 1.0).tolist() == [[0, 128, 128, 255]]
    path = tmp_path / "slice.pgm"
    export_slice_image(values, str(path), 1.0)
    assert path.read_bytes() == b"P5\n4 1\n255\n" + bytes([0, 128, 128, 255])


def test_gray_levels_clamp_and_default_normalization():
    assert to_gray_levels(np.array([[-1.0, 2.0, 4.0]]), 2.0).tolist() == [[0, 255, 255]]
    assert to_gray_levels(np.array([[1.0, 4.0]])).tolist() == [[64, 255]]
    assert not to_gray_levels(np.zeros((2, 2))).any()
    with pytest.raises(PreconditionError):
        to_gray_levels(np.zeros((2, 2, 2)))


def test_mask_file_round_trip(tmp_path):
    mask = random_mask(6)
    path = tmp_path / "hull.pctm"
    write_mask(str(path), mask)
    loaded = read_mask(str(path))
    assert loaded.grid == mask.grid
    np.testing.assert_array_equal(loaded.data, mask.data)


def test_truncated_mask_file(tmp_path):
    path = tmp_path / "hull.pctm"
    write_mask(str(path), random_mask(7))
    raw = path.read_bytes()
    path.write_bytes(raw[:HEADER_SIZE + 56 + 2])
    with pytest.raises(TruncatedFileError):
        read_mask(str(path))


def test_history_file_is_not_a_mask(tmp_path):
    path = tmp_path / "h.pcth"
    write_histories(str(path), HistoryBatch())
    with pytest.raises(BadMagicError):
        read_mask(str(path))


def test_map_ordered_keeps_input_order():
    assert parallel.map_ordered(lambda v: v * v, range(50), threads=4) == [v * v for v in range(50)]
    assert parallel.chunk_bounds(10, 4) == [(0, 4), (4, 8), (8, 10)]
    assert parallel.chunk_bounds(0, 4) == []
    assert parallel.resolve_threads(None) >= 1
    assert parallel.resolve_threads(3) == 3

import math

import numpy as np
import pytest

from src.core.errors import PreconditionError
from src.core.modules.geometry import (GridSpec, LinePath, VoxelIndex, carve, integrate, point_to_voxel,
                                       segment_lengths, segments_hit_box, slice_view, trace_counts,
                                       voxels_along_line)
from src.core.modules.volumes import CountVolume, HullMask, RSPGrid

SHAPES = [
    GridSpec.centered(200, 200, 1),
    GridSpec(17, 23, 9, 1.5, 0.75, 2.0, (-10.0, 4.0, -7.0)),
    GridSpec(40, 30, 5, 1.0, 1.0, 3.0, (-20.0, -15.0, -7.5)),
]


def box_oracle(line: LinePath, grid: GridSpec):
    """
    Test segment / boîte fermée pour chaque voxel de la grille.
    Renvoie {voxel: paramètre t d'entrée dans la boîte}.
    """
    u0 = grid.to_voxel_units(np.array([line.entry_point]))[0]
    u1 = grid.to_voxel_units(np.array([line.exit_point]))[0]
    d = u1 - u0
    iz, iy, ix = np.indices(grid.shape)
    lows = (ix, iy, iz)
    t_near = np.zeros(grid.shape)
    t_far = np.ones(grid.shape)
    for axis in range(3):
        lo = lows[axis].astype(np.float64)
        hi = lo + 1.0
        if d[axis] == 0.0:
            inside = (lo <= u0[axis]) & (u0[axis] <= hi)
            t_far = np.where(inside, t_far, -1.0)
            continue
        ta = (lo - u0[axis]) / d[axis]
        tb = (hi - u0[axis]) / d[axis]
        t_near = np.maximum(t_near, np.minimum(ta, tb))
        t_far = np.minimum(t_far, np.maximum(ta, tb))
    touched = t_near <= t_far
    return {VoxelIndex(int(x), int(y), int(z)): float(t)
            for x, y, z, t in zip(ix[touched], iy[touched], iz[touched], t_near[touched])}


def random_lines(grid: GridSpec, count: int, seed: int):
    rng = np.random.default_rng(seed)
    lo, hi = grid.physical_extent()
    margin = 0.3 * (hi - lo)
    lines = []
    while len(lines) < count:
        a = rng.uniform(lo - margin, hi + margin)
        b = rng.uniform(lo - margin, hi + margin)
        if np.linalg.norm(b - a) > 1e-6:
            lines.append(LinePath(tuple(a), tuple(b)))
    return lines


@pytest.mark.parametrize("grid", SHAPES)
def test_voxels_along_line_matches_box_oracle(grid):
    for line in random_lines(grid, 100, seed=grid.nx * 31 + grid.nz):
        expected = box_oracle(line, grid)
        voxels = voxels_along_line(line, grid)
        assert len(voxels) == len(set(voxels))
        assert set(voxels) == set(expected)
        entry_params = [expected[v] for v in voxels]
        assert all(b >= a - 1e-9 for a, b in zip(entry_params, entry_params[1:]))


@pytest.mark.parametrize("grid", SHAPES)
def test_segment_lengths_sum_to_clipped_length(grid):
    for line in random_lines(grid, 50, seed=11):
        voxels, lengths = segment_lengths(line, grid)
        expected = box_oracle(line, grid)
        if not expected:
            assert len(voxels) == 0
            continue
        u0 = grid.to_voxel_units(np.array([line.entry_point]))[0]
        u1 = grid.to_voxel_units(np.array([line.exit_point]))[0]
        d = u1 - u0
        t_in, t_out = 0.0, 1.0
        dims = (grid.nx, grid.ny, grid.nz)
        for axis in range(3):
            if d[axis] != 0.0:
                ta = (0.0 - u0[axis]) / d[axis]
                tb = (dims[axis] - u0[axis]) / d[axis]
                t_in = max(t_in, min(ta, tb))
                t_out = min(t_out, max(ta, tb))
        assert np.all(lengths >= 0.0)
        assert lengths.sum() == pytest.approx((t_out - t_in) * line.length, rel=1e-9, abs=1e-9)


def test_axis_aligned_line_visits_one_row():
    grid = GridSpec(10, 6, 2)
    voxels, lengths = segment_lengths(LinePath((-3.0, 2.5, 0.5), (14.0, 2.5, 0.5)), grid)
    assert voxels == [VoxelIndex(ix, 2, 0) for ix in range(10)]
    np.testing.assert_allclose(lengths, np.ones(10))


def test_reversed_line_visits_voxels_in_reverse_order():
    grid = GridSpec(10, 6, 2)
    line = LinePath((-3.0, 2.5, 0.5), (14.0, 2.5, 0.5))
    assert voxels_along_line(line.reversed(), grid) == voxels_along_line(line, grid)[::-1]


def test_line_on_voxel_face_touches_both_rows():
    grid = GridSpec(5, 5, 1)
    voxels, lengths = segment_lengths(LinePath((0.0, 2.0, 0.5), (5.0, 2.0, 0.5)), grid)
    assert set(voxels) == {VoxelIndex(ix, iy, 0) for ix in range(5) for iy in (1, 2)}
    assert lengths.sum() == pytest.approx(5.0)


def test_diagonal_through_corners_includes_corner_neighbors():
    grid = GridSpec(3, 3, 1)
    voxels, lengths = segment_lengths(LinePath((0.0, 0.0, 0.5), (3.0, 3.0, 0.5)), grid)
    chord = dict(zip(voxels, lengths))
    assert set(chord) == {VoxelIndex(0, 0, 0), VoxelIndex(1, 0, 0), VoxelIndex(0, 1, 0),
                          VoxelIndex(1, 1, 0), VoxelIndex(2, 1, 0), VoxelIndex(1, 2, 0),
                          VoxelIndex(2, 2, 0)}
    for i in range(3):
        assert chord[VoxelIndex(i, i, 0)] == pytest.approx(math.sqrt(2.0))
    assert chord[VoxelIndex(1, 0, 0)] == 0.0
    assert chord[VoxelIndex(1, 2, 0)] == 0.0


def test_segment_outside_grid_is_empty():
    grid = GridSpec(8, 8, 2)
    assert voxels_along_line(LinePath((-5.0, -5.0, 0.5), (-1.0, 20.0, 0.5)), grid) == []
    assert voxels_along_line(LinePath((1.0, 1.0, 5.0), (6.0, 6.0, 5.0)), grid) == []


def test_zero_length_line_is_rejected():
    with pytest.raises(PreconditionError):
        LinePath((1.0, 2.0, 3.0), (1.0, 2.0, 3.0))


def test_point_to_voxel():
    grid = GridSpec(10, 10, 2, 1.0, 2.0, 3.0)
    assert point_to_voxel((0.0, 0.0, 0.0), grid) == VoxelIndex(0, 0, 0)
    assert point_to_voxel((3.5, 9.0, 4.5), grid) == VoxelIndex(3, 4, 1)
    assert point_to_voxel((10.5, 1.0, 1.0), grid) is None
    assert point_to_voxel((10.0, 1.0, 1.0), grid) is None
    assert point_to_voxel((-0.1, 1.0, 1.0), grid) is None


def test_centered_grid_places_isocenter_in_the_middle():
    grid = GridSpec.centered(200, 200, 8, 1.0, 1.0, 3.0)
    assert grid.origin == (-100.0, -100.0, -12.0)
    assert grid.shape == (8, 200, 200)
    np.testing.assert_allclose(grid.voxel_centers(2)[:2], [-10.5, -7.5])


def test_slice_view_writes_through():
    grid = GridSpec(4, 3, 2)
    volume = grid.zeros()
    slice_view(volume, 1)[2, 3] = 7.0
    assert volume[1, 2, 3] == 7.0
    with pytest.raises(PreconditionError):
        slice_view(volume, 2)


@pytest.mark.parametrize("make", [
    lambda grid: RSPGrid(grid, grid.zeros()),
    lambda grid: HullMask.empty(grid),
    lambda grid: CountVolume(grid, grid.zeros(np.int64), paths=0),
])
def test_volume_slice_is_a_writable_view(make):
    grid = GridSpec(4, 3, 2)
    volume = make(grid)
    view = volume.slice(1)
    assert view.shape == (grid.ny, grid.nx)
    view[2, 3] = 1
    assert volume.data[1, 2, 3] == 1
    assert not volume.data[0].any()
    with pytest.raises(PreconditionError):
        volume.slice(grid.nz)


GRID_ALIGNED_LINES = [
    LinePath((-1.0, -1.0, 0.5), (7.0, 7.0, 0.5)),      # par les coins
    LinePath((7.0, -1.0, 1.5), (-1.0, 3.0, 1.5)),      # pente 1/2, coins tous les deux voxels
    LinePath((-1.0, 2.0, 0.5), (7.0, 2.0, 0.5)),       # sur une face
    LinePath((-1.0, 2.0, 1.0), (7.0, 2.0, 1.0)),       # sur une arête
    LinePath((0.0, -2.0, 0.5), (0.0, 8.0, 0.5)),       # sur la face du bord
    LinePath((-1.0, 5.0, 0.5), (1.0, 7.0, 0.5)),       # contact par le seul coin de la grille
]


def test_batch_kernels_match_listed_voxels_on_grid_aligned_lines():
    grid = GridSpec(6, 6, 2)
    expected = grid.zeros(np.int64)
    for line in GRID_ALIGNED_LINES:
        for v in voxels_along_line(line, grid):
            expected[v.iz, v.iy, v.ix] += 1
    entries = np.array([line.entry_point for line in GRID_ALIGNED_LINES])
    exits = np.array([line.exit_point for line in GRID_ALIGNED_LINES])
    np.testing.assert_array_equal(trace_counts(entries, exits, grid), expected)

    mask = np.ones(grid.shape, dtype=np.uint8)
    carve(entries, exits, grid, mask)
    np.testing.assert_array_equal(mask, (expected == 0).astype(np.uint8))


@pytest.mark.parametrize("grid", SHAPES[1:])
def test_integrate_matches_listed_segment_lengths(grid):
    rng = np.random.default_rng(21)
    volume = rng.random(grid.shape)
    lines = random_lines(grid, 40, seed=23) + GRID_ALIGNED_LINES
    entries = np.array([line.entry_point for line in lines])
    exits = np.array([line.exit_point for line in lines])
    chords = integrate(entries, exits, volume, grid)
    units = integrate(entries, exits, volume, grid, unit_step=0.5)
    for k, line in enumerate(lines):
        voxels, lengths = segment_lengths(line, grid)
        values = np.array([volume[v.iz, v.iy, v.ix] for v in voxels])
        assert chords[k] == pytest.approx(float((values * lengths).sum()), rel=1e-9, abs=1e-12)
        assert units[k] == pytest.approx(0.5 * float(values[lengths > 0].sum()), rel=1e-9, abs=1e-12)


def test_trace_counts_matches_listed_voxels():
    grid = SHAPES[2]
    lines = random_lines(grid, 60, seed=5)
    expected = grid.zeros(np.int64)
    for line in lines:
        for v in voxels_along_line(line, grid):
            expected[v.iz, v.iy, v.ix] += 1
    entries = np.array([line.entry_point for line in lines])
    exits = np.array([line.exit_point for line in lines])
    np.testing.assert_array_equal(trace_counts(entries, exits, grid), expected)


def test_carve_clears_exactly_the_traversed_voxels():
    grid = SHAPES[1]
    lines = random_lines(grid, 20, seed=9)
    mask = np.ones(grid.shape, dtype=np.uint8)
    carve(np.array([l.entry_point for l in lines]), np.array([l.exit_point for l in lines]), grid, mask)
    expected = np.ones(grid.shape, dtype=np.uint8)
    for line in lines:
        for v in voxels_along_line(line, grid):
            expected[v.iz, v.iy, v.ix] = 0
    np.testing.assert_array_equal(mask, expected)


def test_integrate_chord_and_unit_modes():
    grid = GridSpec(20, 20, 1)
    volume = np.full(grid.shape, 2.0)
    entries = np.array([[-5.0, 10.5, 0.5]])
    exits = np.array([[25.0, 10.5, 0.5]])
    assert integrate(entries, exits, volume, grid)[0] == pytest.approx(40.0)
    assert integrate(entries, exits, volume, grid, unit_step=1.0)[0] == pytest.approx(40.0)
    # Un segment qui ne fait qu'effleurer une face n'a pas de longueur
    grazing = integrate(np.array([[0.0, 0.0, 0.5]]), np.array([[-3.0, 0.0, 0.5]]), volume, grid)
    assert grazing[0] == 0.0


def test_segments_hit_box():
    entries = np.array([[-10.0, 0.0, 0.0], [-10.0, 5.0, 0.0], [0.0, 0.0, 0.0]])
    exits = np.array([[10.0, 0.0, 0.0], [10.0, 5.0, 0.0], [0.0, 0.5, 0.0]])
    hits = segments_hit_box(entries, exits, np.array([-1.0, -1.0, -1.0]), np.array([1.0, 1.0, 1.0]))
    assert hits.tolist() == [True, False, True]

"""
Modèle de grille voxel et traversée de segments.

Les coordonnées physiques sont en mm, avec l'isocentre pour origine ; une
grille mémorise la position de son coin inférieur. Les volumes sont des
tableaux numpy indexés [iz, iy, ix].
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import PreconditionError
from src.core.modules import traversal

logger = logging.getLogger(__name__)


class VoxelIndex(NamedTuple):
    """Indice entier d'un voxel"""
    ix: int
    iy: int
    iz: int


@dataclass(frozen=True)
class GridSpec:
    """Grille voxel : nombre de voxels, tailles (mm) et coin inférieur (mm)"""
    nx: int
    ny: int
    nz: int
    voxel_size_x: float = 1.0
    voxel_size_y: float = 1.0
    slice_thickness: float = 1.0
    origin: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 1:
            raise PreconditionError(f"Nombre de voxels invalide: {self.shape}")
        if min(self.voxel_size_x, self.voxel_size_y, self.slice_thickness) <= 0:
            raise PreconditionError("Les tailles de voxel doivent être strictement positives")
        object.__setattr__(self, 'origin', tuple(float(v) for v in self.origin))

    @classmethod
    def centered(cls, nx: int, ny: int, nz: int, voxel_size_x: float = 1.0,
                 voxel_size_y: float = 1.0, slice_thickness: float = 1.0) -> 'GridSpec':
        """Grille centrée sur l'isocentre"""
        origin = (-nx * voxel_size_x / 2.0, -ny * voxel_size_y / 2.0, -nz * slice_thickness / 2.0)
        return cls(nx, ny, nz, voxel_size_x, voxel_size_y, slice_thickness, origin)

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.nz, self.ny, self.nx

    @property
    def sizes(self) -> np.ndarray:
        return np.array([self.voxel_size_x, self.voxel_size_y, self.slice_thickness])

    def physical_extent(self) -> Tuple[np.ndarray, np.ndarray]:
        """Coins inférieur et supérieur de la grille (mm)"""
        lo = np.array(self.origin)
        return lo, lo + self.sizes * np.array([self.nx, self.ny, self.nz])

    def voxel_centers(self, axis: int) -> np.ndarray:
        """Centres physiques des voxels le long d'un axe (0=x, 1=y, 2=z)"""
        count = (self.nx, self.ny, self.nz)[axis]
        return self.origin[axis] + (np.arange(count) + 0.5) * self.sizes[axis]

    def voxel_center(self, index: VoxelIndex) -> np.ndarray:
        return np.array(self.origin) + (np.array(index, dtype=float) + 0.5) * self.sizes

    def to_voxel_units(self, points: np.ndarray) -> np.ndarray:
        """Convertit des points (N, 3) en mm vers les unités voxel"""
        return (np.asarray(points, dtype=np.float64) - np.array(self.origin)) / self.sizes

    def zeros(self, dtype=np.float64) -> np.ndarray:
        return np.zeros(self.shape, dtype=dtype)

    def to_dict(self) -> Dict:
        return {
            "nx": self.nx, "ny": self.ny, "nz": self.nz,
            "voxel_size_x": self.voxel_size_x, "voxel_size_y": self.voxel_size_y,
            "slice_thickness": self.slice_thickness, "origin": list(self.origin),
        }


@dataclass(frozen=True)
class LinePath:
    """Segment droit entre un point d'entrée et un point de sortie (mm)"""
    entry_point: Tuple[float, float, float]
    exit_point: Tuple[float, float, float]
    direction: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        entry = np.asarray(self.entry_point, dtype=np.float64)
        exit_ = np.asarray(self.exit_point, dtype=np.float64)
        norm = float(np.linalg.norm(exit_ - entry))
        if norm == 0.0:
            raise PreconditionError("Segment de longueur nulle")
        object.__setattr__(self, 'entry_point', tuple(entry))
        object.__setattr__(self, 'exit_point', tuple(exit_))
        object.__setattr__(self, 'direction', (exit_ - entry) / norm)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.subtract(self.exit_point, self.entry_point)))

    def reversed(self) -> 'LinePath':
        return LinePath(self.exit_point, self.entry_point)


def _trace(line: LinePath, grid: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    u0 = grid.to_voxel_units(np.array([line.entry_point]))[0]
    u1 = grid.to_voxel_units(np.array([line.exit_point]))[0]
    cap = traversal.buffer_capacity(grid.nx, grid.ny, grid.nz)
    out = np.empty((cap, 3), dtype=np.int64)
    lens = np.empty(cap, dtype=np.float64)
    n = traversal.trace_segment(u0[0], u0[1], u0[2], u1[0], u1[1], u1[2],
                                grid.nx, grid.ny, grid.nz,
                                grid.voxel_size_x, grid.voxel_size_y, grid.slice_thickness,
                                out, lens)
    return out[:n].copy(), lens[:n].copy()


def voxels_along_line(line: LinePath, grid: GridSpec) -> List[VoxelIndex]:
    """
    Voxels dont la boîte est touchée par le segment, de l'entrée vers la sortie.

    Un segment entièrement hors de la grille donne une liste vide.
    """
    indices, _ = _trace(line, grid)
    return [VoxelIndex(int(ix), int(iy), int(iz)) for ix, iy, iz in indices]


def segment_lengths(line: LinePath, grid: GridSpec) -> Tuple[List[VoxelIndex], np.ndarray]:
    """Voxels traversés et longueur d'intersection (mm) dans chacun"""
    indices, lens = _trace(line, grid)
    return [VoxelIndex(int(ix), int(iy), int(iz)) for ix, iy, iz in indices], lens


def point_to_voxel(point: Sequence[float], grid: GridSpec) -> Optional[VoxelIndex]:
    """Voxel contenant le point, ou None hors de la grille (bord supérieur exclu)"""
    u = grid.to_voxel_units(np.array([point]))[0]
    idx = np.floor(u).astype(np.int64)
    if np.any(idx < 0) or idx[0] >= grid.nx or idx[1] >= grid.ny or idx[2] >= grid.nz:
        return None
    return VoxelIndex(int(idx[0]), int(idx[1]), int(idx[2]))


def slice_view(volume: np.ndarray, iz: int) -> np.ndarray:
    """Vue 2D [iy, ix] d'une coupe ; les écritures modifient le volume"""
    data = volume if isinstance(volume, np.ndarray) else volume.data
    if not 0 <= iz < data.shape[0]:
        raise PreconditionError(f"Coupe {iz} hors limites (nz={data.shape[0]})")
    return data[iz]


def segments_to_voxel_units(grid: GridSpec, entries: np.ndarray,
                            exits: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Prépare des lots de segments (N, 3) en mm pour les noyaux numba"""
    return (np.ascontiguousarray(grid.to_voxel_units(entries)),
            np.ascontiguousarray(grid.to_voxel_units(exits)))


def trace_counts(entries: np.ndarray, exits: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Nombre de segments traversant chaque voxel, volume int64 [iz, iy, ix]"""
    counts = grid.zeros(np.int64)
    if len(entries):
        u_in, u_out = segments_to_voxel_units(grid, entries, exits)
        traversal.accumulate_counts(u_in, u_out, counts, grid.voxel_size_x,
                                    grid.voxel_size_y, grid.slice_thickness)
    return counts


def carve(entries: np.ndarray, exits: np.ndarray, grid: GridSpec, mask: np.ndarray) -> np.ndarray:
    """Met à zéro, en place, les voxels du masque uint8 traversés par les segments"""
    if len(entries):
        u_in, u_out = segments_to_voxel_units(grid, entries, exits)
        traversal.carve_segments(u_in, u_out, mask, grid.voxel_size_x,
                                 grid.voxel_size_y, grid.slice_thickness)
    return mask


def integrate(entries: np.ndarray, exits: np.ndarray, volume: np.ndarray, grid: GridSpec,
              unit_step: float = 0.0) -> np.ndarray:
    """Somme du volume le long de chaque segment (longueurs exactes si unit_step <= 0)"""
    result = np.zeros(len(entries), dtype=np.float64)
    if len(entries):
        u_in, u_out = segments_to_voxel_units(grid, entries, exits)
        traversal.integrate_segments(u_in, u_out, np.ascontiguousarray(volume, dtype=np.float64),
                                     grid.voxel_size_x, grid.voxel_size_y, grid.slice_thickness,
                                     unit_step, result)
    return result


def segments_hit_box(entries: np.ndarray, exits: np.ndarray,
                     lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Test vectorisé segment / boîte alignée (méthode des tranches)"""
    d = exits - entries
    t0 = np.zeros(len(entries))
    t1 = np.ones(len(entries))
    inside = np.ones(len(entries), dtype=bool)
    for axis in range(3):
        da = d[:, axis]
        parallel = da == 0.0
        inside &= ~(parallel & ((entries[:, axis] < lo[axis]) | (entries[:, axis] > hi[axis])))
        with np.errstate(divide='ignore', invalid='ignore'):
            ta = (lo[axis] - entries[:, axis]) / da
            tb = (hi[axis] - entries[:, axis]) / da
        near = np.where(parallel, -np.inf, np.minimum(ta, tb))
        far = np.where(parallel, np.inf, np.maximum(ta, tb))
        t0 = np.maximum(t0, near)
        t1 = np.minimum(t1, far)
    return inside & (t0 <= t1)

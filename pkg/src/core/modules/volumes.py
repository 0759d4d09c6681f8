"""
Volumes voxel associés à une grille : RSP, masque d'enveloppe, comptages
"""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from src.core.errors import GridMismatchError, PreconditionError
from src.core.modules.geometry import GridSpec, slice_view


def _check_shape(grid: GridSpec, data: np.ndarray):
    if data.shape != grid.shape:
        raise PreconditionError(f"Forme {data.shape} incompatible avec la grille {grid.shape}")


@dataclass
class RSPGrid:
    """Volume de pouvoirs d'arrêt relatifs (vérité fantôme ou reconstruction FBP)"""
    grid: GridSpec
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        _check_shape(self.grid, self.data)

    @classmethod
    def empty(cls, grid: GridSpec) -> 'RSPGrid':
        return cls(grid, grid.zeros())

    def slice(self, iz: int) -> np.ndarray:
        return slice_view(self.data, iz)

    @property
    def max_rsp(self) -> float:
        return float(self.data.max()) if self.data.size else 0.0


@dataclass
class HullMask:
    """Masque binaire H ou H' ; valeurs dans {0, 1} stockées en uint8"""
    grid: GridSpec
    data: np.ndarray
    notes: List[str] = field(default_factory=list)

    def __post_init__(self):
        data = np.asarray(self.data)
        _check_shape(self.grid, data)
        if data.dtype != np.uint8:
            data = (data != 0).astype(np.uint8)
        elif data.size and data.max() > 1:
            raise PreconditionError("Un masque ne contient que des 0 et des 1")
        self.data = data

    @classmethod
    def full(cls, grid: GridSpec) -> 'HullMask':
        return cls(grid, np.ones(grid.shape, dtype=np.uint8))

    @classmethod
    def empty(cls, grid: GridSpec) -> 'HullMask':
        return cls(grid, np.zeros(grid.shape, dtype=np.uint8))

    def slice(self, iz: int) -> np.ndarray:
        return slice_view(self.data, iz)

    def count(self, iz: Optional[int] = None) -> int:
        """Cardinal du masque, global ou pour une coupe"""
        if iz is None:
            return int(self.data.sum(dtype=np.int64))
        return int(self.slice(iz).sum(dtype=np.int64))

    def require_same_grid(self, other: 'HullMask'):
        if self.grid != other.grid:
            raise GridMismatchError(f"Grilles différentes: {self.grid} / {other.grid}")


@dataclass
class CountVolume:
    """Comptages entiers N(v) (MSC) ou M(v) (SM)"""
    grid: GridSpec
    data: np.ndarray
    paths: int = 0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.int64)
        _check_shape(self.grid, self.data)
        if self.data.size and self.data.min() < 0:
            raise PreconditionError("Les comptages sont positifs ou nuls")

    @classmethod
    def empty(cls, grid: GridSpec) -> 'CountVolume':
        return cls(grid, np.zeros(grid.shape, dtype=np.int64))

    def slice(self, iz: int) -> np.ndarray:
        return slice_view(self.data, iz)

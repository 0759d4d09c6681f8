"""
Rétroprojection filtrée coupe par coupe, faisceau parallèle.

Le sinogramme est le WEPL moyen par bin (angle, latéral, vertical) des
données coupées. Chaque profil latéral est convolué avec le noyau de
Shepp-Logan puis rétroprojeté par interpolation linéaire ; sur 360° chaque
direction est vue deux fois, d'où le facteur (pas angulaire) / 2.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from src.config.models import AlgorithmThresholdsModel, BinningConfigModel
from src.core.errors import InsufficientCoverageError
from src.core.modules import parallel
from src.core.modules.geometry import GridSpec
from src.core.modules.preprocessing import BinGrid, angular_bin_count
from src.core.modules.volumes import HullMask, RSPGrid

logger = logging.getLogger(__name__)


@dataclass
class Sinogram:
    """
    values[ia, iv, il] : WEPL moyen de la vue ia (angle ia * angular_bin),
    du niveau vertical first_vertical + iv et du bin latéral first_lateral + il.
    """
    config: BinningConfigModel
    values: np.ndarray
    covered: np.ndarray
    first_lateral: int = 0
    first_vertical: int = 0
    notes: List[str] = field(default_factory=list)

    @property
    def num_views(self) -> int:
        return self.values.shape[0]

    @property
    def angles(self) -> np.ndarray:
        return np.arange(self.num_views) * self.config.angular_bin

    @property
    def lateral_centers(self) -> np.ndarray:
        return (self.first_lateral + np.arange(self.values.shape[2]) + 0.5) * self.config.lateral_bin

    def missing_views(self) -> np.ndarray:
        """Indices des vues sans aucun bin rempli"""
        return np.flatnonzero(~self.covered.reshape(self.num_views, -1).any(axis=1))

    def level_for(self, z: float) -> Optional[int]:
        """Niveau vertical contenant la hauteur z, None s'il n'existe pas"""
        iv = int(np.floor(z / self.config.vertical_bin)) - self.first_vertical
        if 0 <= iv < self.values.shape[1]:
            return iv
        return None

    def combine(self, a: float, other: 'Sinogram', b: float) -> 'Sinogram':
        """a * self + b * other, sur la même disposition"""
        return replace(self, values=a * self.values + b * other.values,
                       covered=self.covered | other.covered, notes=[])


def build_sinogram(bins: BinGrid) -> Sinogram:
    """WEPL moyen par bin ; les bins vides valent 0 et sont signalés"""
    n_views = angular_bin_count(bins.config)
    if not len(bins):
        message = "Sinogramme vide : aucun bin"
        logger.warning(message)
        return Sinogram(bins.config, np.zeros((n_views, 1, 1)), np.zeros((n_views, 1, 1), dtype=bool),
                        notes=[message])

    ia, il, iv = bins.keys[:, 0], bins.keys[:, 1], bins.keys[:, 2]
    l0, v0 = int(il.min()), int(iv.min())
    shape = (n_views, int(iv.max()) - v0 + 1, int(il.max()) - l0 + 1)
    values = np.zeros(shape)
    covered = np.zeros(shape, dtype=bool)
    values[ia, iv - v0, il - l0] = bins.wepl.mean
    covered[ia, iv - v0, il - l0] = True

    sino = Sinogram(bins.config, values, covered, l0, v0)
    empty = int((~covered).sum())
    if empty:
        message = f"Couverture incomplète : {empty} bins vides sur {covered.size} mis à 0"
        logger.warning(message)
        sino.notes.append(message)
    return sino


def shepp_logan_kernel(size: int, bin_width: float) -> np.ndarray:
    """h(n) = -2 / (pi^2 tau^2 (4 n^2 - 1)) pour n = -(size-1) .. size-1"""
    n = np.arange(-(size - 1), size, dtype=np.float64)
    return -2.0 / (np.pi ** 2 * bin_width ** 2 * (4.0 * n * n - 1.0))


def shepp_logan_filter(projection: np.ndarray, bin_width: float) -> np.ndarray:
    """Convolution discrète d'un profil latéral par le noyau de Shepp-Logan"""
    p = np.asarray(projection, dtype=np.float64)
    size = len(p)
    full = np.convolve(p, shepp_logan_kernel(size, bin_width))
    return full[size - 1:2 * size - 1]


def _backproject_slice(sino: Sinogram, iv: Optional[int], grid: GridSpec) -> np.ndarray:
    image = np.zeros((grid.ny, grid.nx))
    if iv is None:
        return image
    tau = sino.config.lateral_bin
    lateral = sino.lateral_centers
    x = grid.voxel_centers(0)[None, :]
    y = grid.voxel_centers(1)[:, None]
    for ia, angle in enumerate(np.deg2rad(sino.angles)):
        profile = sino.values[ia, iv]
        if not profile.any():
            continue
        q = tau * shepp_logan_filter(profile, tau)
        s = -x * np.sin(angle) + y * np.cos(angle)
        image += np.interp(s, lateral, q, left=0.0, right=0.0)
    return image * np.deg2rad(sino.config.angular_bin) / 2.0


def fbp_reconstruct(sino: Sinogram, grid: GridSpec, threads: Optional[int] = 1) -> RSPGrid:
    """Reconstruction RSP ; chaque coupe utilise le niveau vertical contenant son centre"""
    missing = sino.missing_views()
    if len(missing) > 1:
        raise InsufficientCoverageError(
            f"{len(missing)} vues sans données sur {sino.num_views} (angles {sino.angles[missing][:5]}...)")
    if len(missing) == 1:
        logger.warning("Vue %.1f° absente, reconstruction poursuivie", sino.angles[missing[0]])

    levels = [sino.level_for(z) for z in grid.voxel_centers(2)]
    for iz, iv in enumerate(levels):
        if iv is None:
            logger.warning("Coupe %d hors des niveaux verticaux du sinogramme", iz)
    slices = parallel.map_ordered(lambda iv: _backproject_slice(sino, iv, grid), levels, threads)
    return RSPGrid(grid, np.stack(slices))


def fbp_hull(recon: RSPGrid, th: AlgorithmThresholdsModel) -> HullMask:
    """Voxels de RSP >= fbp_rsp_threshold"""
    return HullMask(recon.grid, recon.data >= th.fbp_rsp_threshold)

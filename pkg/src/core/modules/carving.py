"""
Sculpture de l'enveloppe à partir des protons passés à côté de l'objet.

SC  : un trajet représentatif par bin « manqué » (WEPL moyen sous le seuil)
      efface les voxels qu'il traverse, puis un filtre moyenneur 5x5 lisse
      chaque coupe.
MSC : chaque proton manqué incrémente N(v) pour chaque voxel traversé ; un
      voxel est exclu dès que N(v) - N(w) >= N_t pour un voisin w de la coupe.
"""
import logging
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import ndimage

from src.config.models import AlgorithmThresholdsModel
from src.core.modules import parallel
from src.core.modules.geometry import GridSpec, carve, trace_counts
from src.core.modules.preprocessing import BinGrid
from src.core.modules.simulator import HistoryBatch
from src.core.modules.volumes import CountVolume, HullMask

logger = logging.getLogger(__name__)

AlgorithmThresholds = AlgorithmThresholdsModel

_FOUR_NEIGHBORS = ndimage.generate_binary_structure(2, 1)
_EIGHT_NEIGHBORS = np.ones((3, 3), dtype=bool)


def miss_selector(th: AlgorithmThresholds) -> Callable[[HistoryBatch], np.ndarray]:
    """Historiques classés « manqués » : WEPL sous le seuil (et déviation faible si activé)"""
    def select(histories: HistoryBatch) -> np.ndarray:
        keep = histories.wepl < th.wepl_miss_cutoff
        if th.miss_angle_cutoff is not None:
            keep &= np.hypot(*histories.relative_angles()) < th.miss_angle_cutoff
        return keep
    return select


class CountAccumulator:
    """
    Comptage en ligne des trajets sélectionnés par voxel.

    update() peut être appelé au fil de l'acquisition ; chaque morceau est
    compté dans un volume privé et les volumes sont sommés dans l'ordre, le
    résultat ne dépend donc ni du découpage ni du nombre de threads.
    """

    def __init__(self, grid: GridSpec, select: Callable[[HistoryBatch], np.ndarray],
                 threads: Optional[int] = 1, chunk_size: int = 65536):
        self.grid = grid
        self.select = select
        self.threads = threads
        self.chunk_size = chunk_size
        self.counts = grid.zeros(np.int64)
        self.paths = 0

    def update(self, histories: HistoryBatch) -> int:
        """Ajoute un lot ; renvoie le nombre de trajets retenus dans ce lot"""
        if not len(histories):
            return 0
        chosen = self.select(histories)
        entries = histories.entries[chosen]
        exits = histories.exits[chosen]
        bounds = parallel.chunk_bounds(len(entries), self.chunk_size)
        parts = parallel.map_ordered(
            lambda b: trace_counts(entries[b[0]:b[1]], exits[b[0]:b[1]], self.grid),
            bounds, self.threads)
        self.counts += parallel.sum_ordered(parts, self.grid.shape, np.int64)
        self.paths += len(entries)
        return len(entries)

    def finalize(self) -> CountVolume:
        return CountVolume(self.grid, self.counts.copy(), self.paths)


def average_filter_5x5(slices: np.ndarray) -> np.ndarray:
    """
    Moyenne sur une fenêtre 5x5 de chaque coupe (deux derniers axes), bords
    complétés par des zéros. Deux passes 1D de sommes entières.
    """
    sums = np.asarray(slices, dtype=np.int64)
    for axis in (-2, -1):
        sums = ndimage.correlate1d(sums, np.ones(5, dtype=np.int64), axis=axis, mode='constant', cval=0)
    return sums / 25.0


def miss_bins(bins: BinGrid, th: AlgorithmThresholds) -> np.ndarray:
    """Bins dont le trajet moyen est passé à côté de l'objet : WEPL moyen sous le seuil de manque"""
    miss = bins.wepl.mean < th.wepl_miss_cutoff
    if th.miss_angle_cutoff is not None:
        miss &= bins.angle_change < th.miss_angle_cutoff
    return miss


def slice_segments(bins: BinGrid, grid: GridSpec, chosen: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Trajets centraux des bins choisis, un par coupe dont le centre tombe dans
    l'intervalle vertical du bin, posés à la hauteur de ce centre.
    """
    entries, exits = bins.center_paths()
    z_lo, z_hi = bins.vertical_intervals()
    zc = grid.voxel_centers(2)
    k, iz = np.nonzero(chosen[:, None] & (z_lo[:, None] <= zc[None, :]) & (zc[None, :] < z_hi[:, None]))
    e = entries[k]
    x = exits[k]
    e[:, 2] = x[:, 2] = zc[iz]
    return e, x


def sc_carve(bins: BinGrid, grid: GridSpec, th: AlgorithmThresholds,
             threads: Optional[int] = 1) -> HullMask:
    """
    Masque avant filtrage : tout à 1, puis chaque bin manqué efface son
    trajet central dans chaque coupe dont le centre tombe dans l'intervalle
    vertical du bin. Les trajets de toutes les coupes sont sculptés ensemble ;
    à hauteur du centre d'une coupe, un trajet ne touche que cette coupe.
    """
    mask = HullMask.full(grid)
    if not len(bins):
        message = "SC : aucun bin disponible, rien n'a été sculpté"
        logger.warning(message)
        mask.notes.append(message)
        return mask

    miss = miss_bins(bins, th)
    logger.info("SC : %d bins manqués sur %d", int(miss.sum()), len(bins))
    entries, exits = slice_segments(bins, grid, miss)
    if not len(entries):
        message = "SC : aucun bin manqué, rien n'a été sculpté"
        logger.warning(message)
        mask.notes.append(message)
        return mask

    # Écritures concurrentes de la même valeur 0 : résultat indépendant du découpage
    workers = parallel.resolve_threads(threads)
    size = max(1, -(-len(entries) // workers))
    parallel.map_ordered(lambda b: carve(entries[b[0]:b[1]], exits[b[0]:b[1]], grid, mask.data),
                         parallel.chunk_bounds(len(entries), size), threads)
    return mask


def sc_detect(bins: BinGrid, grid: GridSpec, th: AlgorithmThresholds,
              threads: Optional[int] = 1) -> HullMask:
    """
    Enveloppe SC : sculpture puis filtre 5x5 rebinarisé à sc_filter_threshold.
    Sans aucun voxel sculpté, l'enveloppe est la grille entière.
    """
    carved = sc_carve(bins, grid, th, threads)
    if carved.data.all():
        hull = HullMask.full(grid)
        hull.notes.extend(carved.notes)
        return hull
    hull = HullMask(grid, average_filter_5x5(carved.data) > th.sc_filter_threshold)
    hull.notes.extend(carved.notes)
    return hull


def msc_exclusions(n_slice: np.ndarray, nt: int) -> np.ndarray:
    """Voxels v tels que N(v) - N(w) >= nt pour au moins un voisin w (4-voisinage de la coupe)"""
    n = np.asarray(n_slice, dtype=np.int64)
    excluded = np.zeros(n.shape, dtype=bool)
    down = n[1:, :] - n[:-1, :]
    excluded[1:, :] |= down >= nt
    excluded[:-1, :] |= -down >= nt
    right = n[:, 1:] - n[:, :-1]
    excluded[:, 1:] |= right >= nt
    excluded[:, :-1] |= -right >= nt
    return excluded


def _border_labels(labels: np.ndarray) -> np.ndarray:
    edge = np.concatenate([labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]])
    return np.unique(edge[edge > 0])


def _drop_small_components(hull: np.ndarray, min_size: int) -> np.ndarray:
    labels, count = ndimage.label(hull, structure=_EIGHT_NEIGHBORS)
    if not count:
        return hull
    sizes = np.bincount(labels.ravel(), minlength=count + 1)
    small = sizes < min_size
    small[0] = False
    return hull & ~small[labels]


def msc_slice_mask(n_slice: np.ndarray, th: AlgorithmThresholds) -> np.ndarray:
    """Masque booléen MSC d'une coupe de comptages N"""
    retained = ~msc_exclusions(n_slice, th.msc_Nt)
    if not th.msc_exterior_fill:
        return retained

    outside = retained & (np.asarray(n_slice) >= th.msc_Nt)
    labels, _ = ndimage.label(outside, structure=_FOUR_NEIGHBORS)
    exterior = np.isin(labels, _border_labels(labels))
    hull = retained & ~exterior
    if th.msc_min_component > 0:
        hull = _drop_small_components(hull, th.msc_min_component)
    return hull


def msc_mask_from_counts(counts: CountVolume, th: AlgorithmThresholds) -> HullMask:
    hull = HullMask.empty(counts.grid)
    for iz in range(counts.grid.nz):
        hull.slice(iz)[...] = msc_slice_mask(counts.slice(iz), th)
    if counts.paths == 0:
        hull.notes.append("MSC : aucun proton manqué")
    return hull


def msc_detect(histories: HistoryBatch, grid: GridSpec, th: AlgorithmThresholds,
               threads: Optional[int] = 1, chunk_size: int = 65536) -> Tuple[HullMask, CountVolume]:
    """Enveloppe MSC à partir des historiques bruts (sans coupures ni regroupement)"""
    accumulator = CountAccumulator(grid, miss_selector(th), threads, chunk_size)
    accumulator.update(histories)
    counts = accumulator.finalize()
    logger.info("MSC : %d trajets manqués comptés", counts.paths)
    return msc_mask_from_counts(counts, th), counts

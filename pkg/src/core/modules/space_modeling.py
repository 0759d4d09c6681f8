"""
Modélisation de l'espace occupé (SM).

Chaque proton « touché » (WEPL au-dessus du seuil) incrémente M(v) pour
chaque voxel traversé. M chute brutalement au bord de l'objet : un
détecteur de contours de type Canny trouve cette chute dans chaque coupe
et fixe le seuil M_t ; l'enveloppe est {v : M(v) > M_t}.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import ndimage

from src.config.models import AlgorithmThresholdsModel
from src.core.errors import NoEdgeError
from src.core.modules.carving import CountAccumulator
from src.core.modules.geometry import GridSpec
from src.core.modules.simulator import HistoryBatch
from src.core.modules.volumes import CountVolume, HullMask

logger = logging.getLogger(__name__)

AlgorithmThresholds = AlgorithmThresholdsModel

# Voisins [iy, ix] le long de chaque direction de gradient : 0°, 45°, 90°, 135°
_NMS_OFFSETS = ((0, 1), (1, 1), (1, 0), (1, -1))
_RELATIVE_TIE = 1e-12
# Écart relatif (au gradient maximal) sous lequel deux gradients sont égaux
_FLAT_TOLERANCE = 1e-9


@dataclass
class EdgeChain:
    """Chaîne de contour retenue dans une coupe"""
    pixels: np.ndarray          # masque booléen [iy, ix]
    mean_gradient: float
    threshold: float            # M_t


def hit_selector(th: AlgorithmThresholds) -> Callable[[HistoryBatch], np.ndarray]:
    """Historiques « touchés » : WEPL au-dessus du seuil, ou forte déviation si activé"""
    def select(histories: HistoryBatch) -> np.ndarray:
        hit = histories.wepl > th.wepl_hit_cutoff
        if th.hit_angle_cutoff is not None:
            hit |= np.hypot(*histories.relative_angles()) > th.hit_angle_cutoff
        return hit
    return select


def gradient_neighbors(magnitude: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Gradients des deux voisins de chaque pixel le long de la direction du gradient (zéro hors coupe)"""
    direction = (np.round(np.arctan2(gy, gx) / (np.pi / 4.0)).astype(np.int64)) % 4
    padded = np.pad(magnitude, 1, mode='constant')
    ny, nx = magnitude.shape
    ahead = np.zeros_like(magnitude)
    behind = np.zeros_like(magnitude)
    for d, (dy, dx) in enumerate(_NMS_OFFSETS):
        along = direction == d
        ahead[along] = padded[1 + dy:1 + dy + ny, 1 + dx:1 + dx + nx][along]
        behind[along] = padded[1 - dy:1 - dy + ny, 1 - dx:1 - dx + nx][along]
    return ahead, behind


def non_maximum_suppression(magnitude: np.ndarray, gx: np.ndarray, gy: np.ndarray,
                            tolerance: float = 0.0) -> np.ndarray:
    """Pixels au moins égaux (à tolerance près) à leurs deux voisins le long de la direction du gradient"""
    ahead, behind = gradient_neighbors(magnitude, gx, gy)
    return (magnitude >= ahead - tolerance) & (magnitude >= behind - tolerance) & (magnitude > 0)


def flat_gradient(magnitude: np.ndarray, gx: np.ndarray, gy: np.ndarray, tolerance: float) -> np.ndarray:
    """Pixels dont le gradient égale celui de leurs deux voisins : pente constante, pas de bord"""
    ahead, behind = gradient_neighbors(magnitude, gx, gy)
    return (np.abs(magnitude - ahead) <= tolerance) & (np.abs(magnitude - behind) <= tolerance)


def detect_edge_chain(m_slice: np.ndarray, sigma: float = 2.0, low: float = 0.1,
                      high: float = 0.3) -> EdgeChain:
    """
    Chaîne de contour la plus marquée d'une coupe de comptages.

    Lissage gaussien, gradients de Sobel, suppression des non-maxima puis
    hystérésis relative au gradient maximal ; parmi les chaînes 8-connexes
    restantes, celle de plus fort gradient moyen l'emporte (à égalité, celle
    qui donne le plus petit seuil). Le seuil est le maximum de l'image lissée
    sur la chaîne : sur une marche nette 0 -> C il reste sous C.

    Une pente constante n'a pas de bord distingué : si la majorité des pixels
    de la chaîne retenue ont le même gradient que leurs voisins, le seuil est
    le maximum de la coupe et le masque est vide.
    """
    m = np.asarray(m_slice, dtype=np.float64)
    if not m.any():
        raise NoEdgeError("Coupe sans aucun comptage : pas de contour")

    smoothed = ndimage.gaussian_filter(m, sigma, mode='nearest')
    gy = ndimage.sobel(smoothed, axis=0)
    gx = ndimage.sobel(smoothed, axis=1)
    magnitude = np.hypot(gx, gy)
    peak = float(magnitude.max())
    if peak <= 0.0:
        raise NoEdgeError("Coupe uniforme : pas de contour")

    tolerance = _FLAT_TOLERANCE * peak
    edges = non_maximum_suppression(magnitude, gx, gy, tolerance) & (magnitude >= low * peak)
    labels, count = ndimage.label(edges, structure=np.ones((3, 3), dtype=bool))
    if not count:
        raise NoEdgeError("Aucun pixel de contour après suppression des non-maxima")

    index = np.arange(1, count + 1)
    strongest = ndimage.maximum(magnitude, labels, index)
    means = np.asarray(ndimage.mean(magnitude, labels, index))
    thresholds = np.asarray(ndimage.maximum(smoothed, labels, index))
    survivors = np.flatnonzero(np.asarray(strongest) >= high * peak)

    best_mean = means[survivors].max()
    tied = survivors[means[survivors] >= best_mean - _RELATIVE_TIE * best_mean]
    chosen = tied[np.argmin(thresholds[tied])]
    pixels = labels == chosen + 1
    threshold = float(thresholds[chosen])
    if flat_gradient(magnitude, gx, gy, tolerance)[pixels].mean() > 0.5:
        logger.debug("SM : gradient constant sur la chaîne, pas de bord distingué")
        threshold = float(m.max())
    return EdgeChain(pixels, float(means[chosen]), threshold)


def sm_threshold_for_slice(m_slice: np.ndarray, sigma: float = 2.0, low: float = 0.1,
                           high: float = 0.3) -> float:
    """Seuil M_t d'une coupe"""
    return detect_edge_chain(m_slice, sigma, low, high).threshold


def sm_mask_from_counts(counts: CountVolume, th: AlgorithmThresholds) -> HullMask:
    hull = HullMask.empty(counts.grid)
    for iz in range(counts.grid.nz):
        m = counts.slice(iz)
        try:
            threshold = sm_threshold_for_slice(m, th.sm_sigma, th.sm_edge_low, th.sm_edge_high)
        except NoEdgeError as e:
            message = f"SM : coupe {iz} laissée vide ({e})"
            logger.warning(message)
            hull.notes.append(message)
            continue
        logger.debug("SM : coupe %d, M_t = %.3f", iz, threshold)
        hull.slice(iz)[...] = m > threshold
    return hull


def sm_detect(histories: HistoryBatch, grid: GridSpec, th: AlgorithmThresholds,
              threads: Optional[int] = 1, chunk_size: int = 65536) -> Tuple[HullMask, CountVolume]:
    """Enveloppe SM à partir des historiques bruts"""
    accumulator = CountAccumulator(grid, hit_selector(th), threads, chunk_size)
    accumulator.update(histories)
    counts = accumulator.finalize()
    logger.info("SM : %d trajets touchés comptés", counts.paths)
    return sm_mask_from_counts(counts, th), counts

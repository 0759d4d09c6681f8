"""
Regroupement des historiques par (angle, déplacement latéral, déplacement
vertical) et coupures à k écarts-types.

Les intervalles angulaires sont centrés sur les multiples de angular_bin :
indice = floor(theta / delta + 1/2) modulo 360 / delta. Les déplacements
latéral s_mid = (s_in + s_out) / 2 et vertical z_mid = (z_in + z_out) / 2
sont rangés par floor(q / largeur).
"""
import logging
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from src.config.models import BinningConfigModel
from src.core.modules.geometry import LinePath
from src.core.modules.simulator import HistoryBatch

logger = logging.getLogger(__name__)

BinningConfig = BinningConfigModel

DEFAULT_PATH_RADIUS = 150.0


@dataclass
class BinStatistic:
    """Moyenne et écart-type (population) d'une grandeur par bin"""
    mean: np.ndarray
    std: np.ndarray


@dataclass
class BinGrid:
    config: BinningConfig
    histories: HistoryBatch
    keys: np.ndarray          # (n_bins, 3) : indices angle, latéral, vertical
    assignment: np.ndarray    # (N,) : bin de chaque historique
    counts: np.ndarray
    wepl: BinStatistic
    relative_horizontal: BinStatistic
    relative_vertical: BinStatistic
    angle_change: np.ndarray  # moyenne de hypot(relatif horizontal, relatif vertical)
    radius: float = DEFAULT_PATH_RADIUS
    removed: int = 0
    notes: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.keys)

    @property
    def num_angles(self) -> int:
        return angular_bin_count(self.config)

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == k)

    def angles(self) -> np.ndarray:
        """Angle central (degrés) de chaque bin"""
        return self.keys[:, 0] * self.config.angular_bin

    def lateral_centers(self) -> np.ndarray:
        return (self.keys[:, 1] + 0.5) * self.config.lateral_bin

    def vertical_intervals(self) -> Tuple[np.ndarray, np.ndarray]:
        lo = self.keys[:, 2] * self.config.vertical_bin
        return lo, lo + self.config.vertical_bin

    def center_paths(self) -> Tuple[np.ndarray, np.ndarray]:
        """Segments centraux (entrées, sorties) de tous les bins, en mm"""
        theta = np.deg2rad(self.angles())
        b = np.column_stack([np.cos(theta), np.sin(theta), np.zeros_like(theta)])
        s = np.column_stack([-np.sin(theta), np.cos(theta), np.zeros_like(theta)])
        lat = self.lateral_centers()[:, None]
        z_lo, z_hi = self.vertical_intervals()
        entries = lat * s - self.radius * b
        exits = lat * s + self.radius * b
        entries[:, 2] = exits[:, 2] = 0.5 * (z_lo + z_hi)
        return entries, exits


def angular_bin_count(cfg: BinningConfig) -> int:
    return max(1, int(round(360.0 / cfg.angular_bin)))


def _binning_quantities(histories: HistoryBatch) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    records = histories.records
    s_in, s_out = histories.lateral_positions()
    z_mid = 0.5 * (records["entry_z"] + records["exit_z"])
    return records["projection_angle"], 0.5 * (s_in + s_out), z_mid


def _statistic(values: np.ndarray, assignment: np.ndarray, counts: np.ndarray) -> BinStatistic:
    n_bins = len(counts)
    mean = np.bincount(assignment, weights=values, minlength=n_bins) / counts
    deviation = values - mean[assignment]
    var = np.bincount(assignment, weights=deviation * deviation, minlength=n_bins) / counts
    return BinStatistic(mean, np.sqrt(np.maximum(var, 0.0)))


def _path_radius(histories: HistoryBatch) -> float:
    if not len(histories):
        return DEFAULT_PATH_RADIUS
    theta = np.deg2rad(histories.records["projection_angle"])
    entries = histories.entries
    along = entries[:, 0] * np.cos(theta) + entries[:, 1] * np.sin(theta)
    return float(max(DEFAULT_PATH_RADIUS, np.max(np.abs(along))))


def bin_histories(histories: HistoryBatch, cfg: BinningConfig) -> BinGrid:
    """Regroupe les historiques et calcule les statistiques de chaque bin"""
    n_angles = angular_bin_count(cfg)
    if not len(histories):
        empty = BinStatistic(np.zeros(0), np.zeros(0))
        return BinGrid(cfg, histories, np.zeros((0, 3), dtype=np.int64), np.zeros(0, dtype=np.int64),
                       np.zeros(0, dtype=np.int64), empty, empty, empty, np.zeros(0),
                       notes=["aucun historique à regrouper"])

    angle, lateral, vertical = _binning_quantities(histories)
    ia = np.mod(np.floor(angle / cfg.angular_bin + 0.5).astype(np.int64), n_angles)
    il = np.floor(lateral / cfg.lateral_bin).astype(np.int64)
    iv = np.floor(vertical / cfg.vertical_bin).astype(np.int64)

    keys, assignment = np.unique(np.column_stack([ia, il, iv]), axis=0, return_inverse=True)
    assignment = assignment.reshape(-1)
    counts = np.bincount(assignment, minlength=len(keys))

    rel_h, rel_v = histories.relative_angles()
    change = np.hypot(rel_h, rel_v)
    grid = BinGrid(
        config=cfg,
        histories=histories,
        keys=keys,
        assignment=assignment,
        counts=counts,
        wepl=_statistic(histories.wepl, assignment, counts),
        relative_horizontal=_statistic(rel_h, assignment, counts),
        relative_vertical=_statistic(rel_v, assignment, counts),
        angle_change=np.bincount(assignment, weights=change, minlength=len(keys)) / counts,
        radius=_path_radius(histories),
    )
    logger.info("%d historiques répartis dans %d bins", len(histories), len(grid))
    return grid


def cut_mask(bins: BinGrid) -> np.ndarray:
    """Historiques conservés par les coupures (True = conservé)"""
    keep = np.ones(len(bins.histories), dtype=bool)
    if not len(bins):
        return keep
    a = bins.assignment
    eligible = bins.counts[a] >= 2
    rel_h, rel_v = bins.histories.relative_angles()
    k = bins.config.cut_sigma
    for values, stat in ((bins.histories.wepl, bins.wepl),
                         (rel_h, bins.relative_horizontal),
                         (rel_v, bins.relative_vertical)):
        mean = stat.mean[a]
        tolerance = 1e-12 * np.maximum(1.0, np.abs(mean))
        outside = np.abs(values - mean) > k * stat.std[a] + tolerance
        keep &= ~(eligible & outside)
    return keep


def apply_data_cuts(bins: BinGrid) -> Tuple[HistoryBatch, BinGrid]:
    """
    Coupure unique : retire les historiques dont le WEPL ou un angle relatif
    s'écarte de plus de cut_sigma écarts-types de la moyenne de leur bin,
    puis recalcule les statistiques sur les survivants. Les bins de moins de
    deux historiques sont exemptés.
    """
    keep = cut_mask(bins)
    survivors = bins.histories[keep] if len(bins.histories) else bins.histories
    updated = bin_histories(survivors, bins.config)
    updated.removed = bins.removed + int((~keep).sum())
    logger.info("Coupures: %d historiques retirés sur %d", int((~keep).sum()), len(keep))
    return survivors, updated


def representative_path(bins: BinGrid, k: int) -> LinePath:
    """Trajet droit au centre du bin k"""
    entries, exits = bins.center_paths()
    return LinePath(tuple(entries[k]), tuple(exits[k]))


def bin_report(bins: BinGrid) -> str:
    """Tableau texte : occupation des bins et fraction retirée par les coupures"""
    total = len(bins.histories) + bins.removed
    removed_pct = 100.0 * bins.removed / total if total else 0.0
    lines = [
        f"Historiques retenus : {len(bins.histories)}",
        f"Historiques retirés : {bins.removed} ({removed_pct:.2f} %)",
        f"Bins occupés        : {len(bins)}",
        "",
        f"{'angle':>7} {'bins':>7} {'historiques':>12} {'WEPL moyen':>11} {'écart-type moyen':>17}",
    ]
    for ia in np.unique(bins.keys[:, 0]) if len(bins) else []:
        sel = bins.keys[:, 0] == ia
        weights = bins.counts[sel]
        mean_wepl = float(np.average(bins.wepl.mean[sel], weights=weights))
        mean_std = float(np.average(bins.wepl.std[sel], weights=weights))
        lines.append(f"{ia * bins.config.angular_bin:7.1f} {int(sel.sum()):7d} {int(weights.sum()):12d} "
                     f"{mean_wepl:11.3f} {mean_std:17.3f}")
    return "\n".join(lines) + "\n"

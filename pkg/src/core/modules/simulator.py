"""
Simulation d'historiques de protons à travers un fantôme RSP.

Géométrie par projection d'angle theta (faisceau parallèle) :
    direction du faisceau  b = (cos theta, sin theta, 0)
    axe latéral            s = (-sin theta, cos theta, 0)
    plans du scanner       à -R (entrée) et +R (sortie) le long de b

Chaque projection utilise son propre flux aléatoire, dérivé de la graine
par SeedSequence.spawn : le résultat ne dépend pas du nombre de threads.
"""
import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from src.config.models import NoiseModel, ScanConfigModel
from src.core.errors import PreconditionError
from src.core.modules import parallel
from src.core.modules.geometry import LinePath, integrate, segments_hit_box
from src.core.modules.volumes import RSPGrid

logger = logging.getLogger(__name__)

HISTORY_FIELDS = (
    "projection_angle",
    "entry_x", "entry_y", "entry_z",
    "exit_x", "exit_y", "exit_z",
    "entry_angle", "exit_angle",
    "entry_vertical_angle", "exit_vertical_angle",
    "vertical_displacement",
    "wepl",
)
HISTORY_DTYPE = np.dtype([(name, '<f8') for name in HISTORY_FIELDS])

# Flux aléatoire réservé au bruit WEPL, distinct des flux par projection
_NOISE_STREAM = 0x6E6F

WEPL_MODES = ("chord", "unit")


@dataclass(frozen=True)
class ProtonHistory:
    """Historique d'un proton (angles en radians, longueurs en mm)"""
    projection_angle: float
    entry_point: Tuple[float, float, float]
    exit_point: Tuple[float, float, float]
    entry_angle: float
    exit_angle: float
    entry_vertical_angle: float
    exit_vertical_angle: float
    vertical_displacement: float
    wepl: float

    @property
    def path(self) -> LinePath:
        return LinePath(self.entry_point, self.exit_point)


class HistoryBatch:
    """Lot d'historiques stocké en tableau structuré numpy (un enregistrement par proton)"""

    def __init__(self, records: Optional[np.ndarray] = None):
        if records is None:
            records = np.zeros(0, dtype=HISTORY_DTYPE)
        if records.dtype != HISTORY_DTYPE:
            raise PreconditionError(f"dtype d'historique inattendu: {records.dtype}")
        self.records = records

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ProtonHistory]:
        return iter_histories(self)

    def __getitem__(self, index) -> 'HistoryBatch':
        return HistoryBatch(np.atleast_1d(self.records[index]))

    @classmethod
    def from_histories(cls, histories: Sequence[ProtonHistory]) -> 'HistoryBatch':
        records = np.zeros(len(histories), dtype=HISTORY_DTYPE)
        for i, h in enumerate(histories):
            records[i] = (h.projection_angle, *h.entry_point, *h.exit_point, h.entry_angle,
                          h.exit_angle, h.entry_vertical_angle, h.exit_vertical_angle,
                          h.vertical_displacement, h.wepl)
        return cls(records)

    @classmethod
    def concatenate(cls, batches: Sequence['HistoryBatch']) -> 'HistoryBatch':
        if not batches:
            return cls()
        return cls(np.concatenate([b.records for b in batches]))

    @property
    def entries(self) -> np.ndarray:
        r = self.records
        return np.column_stack([r["entry_x"], r["entry_y"], r["entry_z"]])

    @property
    def exits(self) -> np.ndarray:
        r = self.records
        return np.column_stack([r["exit_x"], r["exit_y"], r["exit_z"]])

    @property
    def wepl(self) -> np.ndarray:
        return self.records["wepl"]

    def lateral_positions(self) -> Tuple[np.ndarray, np.ndarray]:
        """Déplacements latéraux d'entrée et de sortie le long de l'axe s"""
        theta = np.deg2rad(self.records["projection_angle"])
        r = self.records
        s_in = -r["entry_x"] * np.sin(theta) + r["entry_y"] * np.cos(theta)
        s_out = -r["exit_x"] * np.sin(theta) + r["exit_y"] * np.cos(theta)
        return s_in, s_out

    def relative_angles(self) -> Tuple[np.ndarray, np.ndarray]:
        """Angles relatifs horizontal et vertical (sortie moins entrée)"""
        r = self.records
        return r["exit_angle"] - r["entry_angle"], r["exit_vertical_angle"] - r["entry_vertical_angle"]

    def with_wepl(self, wepl: np.ndarray) -> 'HistoryBatch':
        records = self.records.copy()
        records["wepl"] = wepl
        return HistoryBatch(records)


def iter_histories(batch: HistoryBatch) -> Iterator[ProtonHistory]:
    for r in batch.records:
        yield ProtonHistory(
            float(r["projection_angle"]),
            (float(r["entry_x"]), float(r["entry_y"]), float(r["entry_z"])),
            (float(r["exit_x"]), float(r["exit_y"]), float(r["exit_z"])),
            float(r["entry_angle"]), float(r["exit_angle"]),
            float(r["entry_vertical_angle"]), float(r["exit_vertical_angle"]),
            float(r["vertical_displacement"]), float(r["wepl"]),
        )


def integrate_wepl_batch(entries: np.ndarray, exits: np.ndarray, rsp: RSPGrid,
                         mode: str = "chord") -> np.ndarray:
    """
    WEPL de chaque corde entrée -> sortie.

    chord : somme des RSP pondérés par la longueur d'intersection exacte.
    unit  : chaque voxel intersecté compte pour la taille de voxel du fantôme.
    """
    if mode not in WEPL_MODES:
        raise PreconditionError(f"Mode WEPL inconnu: {mode}")
    unit_step = rsp.grid.voxel_size_x if mode == "unit" else 0.0
    return integrate(entries, exits, rsp.data, rsp.grid, unit_step)


def integrate_wepl(line: LinePath, rsp: RSPGrid, mode: str = "chord") -> float:
    """WEPL d'une seule corde (mm)"""
    return float(integrate_wepl_batch(np.array([line.entry_point]), np.array([line.exit_point]),
                                      rsp, mode)[0])


def apply_wepl_noise(wepl, params: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    """max(0, w + N(0, sigma_base + sigma_slope * w)) élément par élément"""
    if params.sigma_base < 0 or params.sigma_slope < 0:
        raise PreconditionError("Les écarts-types du bruit WEPL doivent être positifs")
    wepl = np.asarray(wepl, dtype=np.float64)
    if np.any(wepl < 0):
        raise PreconditionError("WEPL négatif")
    sigma = params.sigma_base + params.sigma_slope * wepl
    noisy = wepl + sigma * rng.standard_normal(wepl.shape)
    return np.maximum(noisy, 0.0)


def add_wepl_noise(batch: HistoryBatch, params: NoiseModel, seed: int) -> HistoryBatch:
    """Copie du lot avec WEPL bruité ; la géométrie est partagée avec l'original"""
    rng = np.random.default_rng([seed, _NOISE_STREAM])
    return batch.with_wepl(apply_wepl_noise(batch.wepl, params, rng))


def object_bounding_box(rsp: RSPGrid) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """Boîte physique englobant les voxels de RSP non nul, None si vide"""
    nonzero = np.nonzero(rsp.data > 0)
    if not len(nonzero[0]):
        return None
    grid = rsp.grid
    # nonzero est indexé [iz, iy, ix]
    lo_idx = np.array([nonzero[2].min(), nonzero[1].min(), nonzero[0].min()])
    hi_idx = np.array([nonzero[2].max(), nonzero[1].max(), nonzero[0].max()]) + 1
    origin = np.array(grid.origin)
    return origin + lo_idx * grid.sizes, origin + hi_idx * grid.sizes


def _bivariate_normal(rng: np.random.Generator, n: int, sigma_a: float, sigma_b: float,
                      rho: float) -> Tuple[np.ndarray, np.ndarray]:
    z1 = rng.standard_normal(n)
    z2 = rng.standard_normal(n)
    return sigma_a * z1, sigma_b * (rho * z1 + np.sqrt(1.0 - rho * rho) * z2)


def entry_positions(rng: np.random.Generator, n: int, cfg: ScanConfigModel) -> Tuple[np.ndarray, np.ndarray]:
    """
    Positions latérales s et hauteurs z d'entrée, uniformes sur le champ.

    En mode stratified, le champ est découpé en vertical_strata rangées de
    n // vertical_strata colonnes et chaque case reçoit un proton tiré
    uniformément en son sein ; le reste éventuel est tiré sur tout le champ.
    """
    half_w = cfg.field_width / 2.0
    half_h = cfg.field_height / 2.0
    if cfg.sampling == "uniform" or n < cfg.vertical_strata:
        return (rng.uniform(-half_w, half_w, n),
                cfg.field_center_z + rng.uniform(-half_h, half_h, n))

    rows = cfg.vertical_strata
    cols = n // rows
    col = np.tile(np.arange(cols), rows)
    row = np.repeat(np.arange(rows), cols)
    s_in = -half_w + (col + rng.random(rows * cols)) * (cfg.field_width / cols)
    z_in = -half_h + (row + rng.random(rows * cols)) * (cfg.field_height / rows)
    rest = n - rows * cols
    s_in = np.concatenate([s_in, rng.uniform(-half_w, half_w, rest)])
    z_in = np.concatenate([z_in, rng.uniform(-half_h, half_h, rest)])
    return s_in, cfg.field_center_z + z_in


def simulate_projection(k: int, seed: np.random.SeedSequence, phantom: RSPGrid,
                        cfg: ScanConfigModel,
                        box: Optional[Tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """Historiques sans bruit d'une projection"""
    rng = np.random.default_rng(seed)
    n = cfg.protons_per_projection
    angle = k * cfg.angular_step
    theta = np.deg2rad(angle)
    b = np.array([np.cos(theta), np.sin(theta), 0.0])
    s = np.array([-np.sin(theta), np.cos(theta), 0.0])
    radius = cfg.scanner_radius

    s_in, z_in = entry_positions(rng, n, cfg)
    dh, ah = _bivariate_normal(rng, n, cfg.scatter.sigma_displacement, cfg.scatter.sigma_angle,
                               cfg.scatter.correlation)
    dv, av = _bivariate_normal(rng, n, cfg.scatter.sigma_displacement, cfg.scatter.sigma_angle,
                               cfg.scatter.correlation)

    entries = np.outer(s_in, s) - radius * b
    entries[:, 2] = z_in
    straight_exits = entries + 2.0 * radius * b

    if cfg.scatter.enabled and box is not None:
        crosses = segments_hit_box(entries, straight_exits, box[0], box[1])
    else:
        crosses = np.zeros(n, dtype=bool)
    dh = np.where(crosses, dh, 0.0)
    ah = np.where(crosses, ah, 0.0)
    dv = np.where(crosses, dv, 0.0)
    av = np.where(crosses, av, 0.0)

    exits = np.outer(s_in + dh, s) + radius * b
    exits[:, 2] = z_in + dv

    records = np.zeros(n, dtype=HISTORY_DTYPE)
    records["projection_angle"] = angle
    records["entry_x"], records["entry_y"], records["entry_z"] = entries.T
    records["exit_x"], records["exit_y"], records["exit_z"] = exits.T
    records["exit_angle"] = ah
    records["exit_vertical_angle"] = av
    records["vertical_displacement"] = dv
    records["wepl"] = integrate_wepl_batch(entries, exits, phantom, cfg.wepl_mode)
    return records


def generate_histories(phantom: RSPGrid, cfg: ScanConfigModel, threads: Optional[int] = 1) -> HistoryBatch:
    """
    Historiques de toutes les projections, dans l'ordre des angles.

    Le bruit WEPL, s'il est activé, est appliqué après coup par add_wepl_noise
    avec la même graine : le jeu bruité partage la géométrie du jeu sans bruit.
    """
    if cfg.protons_per_projection == 0 or cfg.num_projections == 0:
        logger.warning("Configuration sans proton : aucun historique généré")
        return HistoryBatch()

    box = object_bounding_box(phantom)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.num_projections)
    logger.info("Simulation de %d historiques (%d projections)", cfg.total_histories, cfg.num_projections)

    parts: List[np.ndarray] = parallel.map_ordered(
        lambda k: simulate_projection(k, seeds[k], phantom, cfg, box),
        range(cfg.num_projections), threads)
    batch = HistoryBatch(np.concatenate(parts))

    if cfg.noise.enabled:
        batch = add_wepl_noise(batch, cfg.noise, cfg.seed)
    return batch

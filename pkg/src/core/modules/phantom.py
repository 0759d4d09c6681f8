"""
Fantôme numérique NEO (objet elliptique non homogène) : ellipses extrudées
en z, rasterisées par appartenance du centre des voxels.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from src.config.models import (EllipseRegionModel, GridSpecModel, PhantomSpecModel,
                               load_model, save_model)
from src.core.errors import PreconditionError
from src.core.modules.geometry import GridSpec
from src.core.modules.volumes import HullMask, RSPGrid

logger = logging.getLogger(__name__)

# Grille de simulation par défaut : 200 x 200 mm, 36 coupes de 1 mm ; plus haute que le champ
DEFAULT_PHANTOM_GRID = GridSpec(200, 200, 36, 1.0, 1.0, 1.0, (-100.0, -100.0, -18.0))


@dataclass(frozen=True)
class EllipseRegion:
    """Cylindre elliptique d'un matériau donné"""
    center: Tuple[float, float]
    semi_axis_a: float
    semi_axis_b: float
    rsp: float
    rotation: float = 0.0
    z_range: Optional[Tuple[float, float]] = None
    priority: int = 0
    name: str = ""

    def __post_init__(self):
        if self.semi_axis_a <= 0 or self.semi_axis_b <= 0:
            raise PreconditionError(f"Demi-axes invalides pour la région '{self.name}'")
        if self.rsp < 0:
            raise PreconditionError(f"RSP négatif pour la région '{self.name}'")

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Appartenance des points (x, y) à l'ellipse, bord inclus"""
        dx = x - self.center[0]
        dy = y - self.center[1]
        c, s = np.cos(self.rotation), np.sin(self.rotation)
        u = c * dx + s * dy
        v = -s * dx + c * dy
        return (u * u) / (self.semi_axis_a * self.semi_axis_a) + \
            (v * v) / (self.semi_axis_b * self.semi_axis_b) <= 1.0

    def covers_slice(self, z: float) -> bool:
        return self.z_range is None or self.z_range[0] <= z <= self.z_range[1]

    def bounding_box(self) -> Tuple[float, float, float, float]:
        """Boîte englobante (xmin, xmax, ymin, ymax) de l'ellipse tournée"""
        c, s = np.cos(self.rotation), np.sin(self.rotation)
        hx = float(np.hypot(self.semi_axis_a * c, self.semi_axis_b * s))
        hy = float(np.hypot(self.semi_axis_a * s, self.semi_axis_b * c))
        return (self.center[0] - hx, self.center[0] + hx,
                self.center[1] - hy, self.center[1] + hy)


@dataclass(frozen=True)
class PhantomSpec:
    grid: GridSpec
    regions: List[EllipseRegion] = field(default_factory=list)
    name: str = "neo"
    description: str = ""

    def on_grid(self, grid: GridSpec) -> 'PhantomSpec':
        """Même fantôme sur une autre grille"""
        return PhantomSpec(grid, list(self.regions), self.name, self.description)

    def clipped_regions(self) -> List[str]:
        """Noms des régions qui débordent de la grille"""
        lo, hi = self.grid.physical_extent()
        clipped = []
        for region in self.regions:
            xmin, xmax, ymin, ymax = region.bounding_box()
            if xmin < lo[0] or xmax > hi[0] or ymin < lo[1] or ymax > hi[1]:
                clipped.append(region.name or f"{region.center}")
        return clipped


def rasterize_phantom(spec: PhantomSpec) -> RSPGrid:
    """
    Volume RSP du fantôme.

    Chaque voxel reçoit le RSP de la région de plus haute priorité contenant
    son centre, 0 ailleurs. À priorité égale l'ordre de la liste départage.
    """
    for name in spec.clipped_regions():
        logger.warning("Région '%s' tronquée par la grille", name)

    grid = spec.grid
    volume = grid.zeros()
    xs = grid.voxel_centers(0)
    ys = grid.voxel_centers(1)
    zs = grid.voxel_centers(2)
    x, y = np.meshgrid(xs, ys)

    ordered = sorted(enumerate(spec.regions), key=lambda item: (item[1].priority, item[0]))
    for _, region in ordered:
        inside = region.contains(x, y)
        for iz, z in enumerate(zs):
            if region.covers_slice(z):
                volume[iz][inside] = region.rsp

    logger.debug("Fantôme '%s' rasterisé: %d voxels non nuls", spec.name, int(np.count_nonzero(volume)))
    return RSPGrid(grid, volume)


def true_hull(rsp: RSPGrid) -> HullMask:
    """Enveloppe vraie H : voxels de RSP strictement positif"""
    return HullMask(rsp.grid, (rsp.data > 0).astype(np.uint8))


def truth_on_grid(spec: PhantomSpec, grid: GridSpec) -> HullMask:
    """Enveloppe vraie rasterisée sur la grille de reconstruction"""
    return true_hull(rasterize_phantom(spec.on_grid(grid)))


def default_neo_spec(grid: GridSpec = DEFAULT_PHANTOM_GRID, extended: bool = False) -> PhantomSpec:
    """
    NEO par défaut : os, cerveau, deux ventricules (et un sinus frontal en
    option). Les demi-axes sont des choix de configuration ; l'ellipse
    osseuse couvre 15 336 centres de voxels par coupe sur la grille 1 mm
    de 200 x 200 mm centrée.
    """
    regions = [
        EllipseRegion((0.0, 0.0), 62.81, 77.7, 1.6, priority=0, name="bone"),
        EllipseRegion((0.0, 0.0), 56.5, 71.0, 1.04, priority=1, name="brain"),
        EllipseRegion((-9.0, 5.0), 5.0, 16.0, 0.9, rotation=0.25, priority=2, name="ventricle_left"),
        EllipseRegion((9.0, 5.0), 5.0, 16.0, 0.9, rotation=-0.25, priority=2, name="ventricle_right"),
    ]
    if extended:
        regions.append(EllipseRegion((0.0, 66.0), 12.0, 4.0, 0.2, priority=3, name="frontal_sinus"))
    return PhantomSpec(grid, regions, "neo_extended" if extended else "neo")


def spec_from_model(model: PhantomSpecModel) -> PhantomSpec:
    regions = [
        EllipseRegion(tuple(r.center), r.semi_axis_a, r.semi_axis_b, r.rsp, r.rotation,
                      tuple(r.z_range) if r.z_range is not None else None, r.priority, r.name)
        for r in model.regions
    ]
    return PhantomSpec(model.grid.to_grid(), regions, model.name, model.description)


def spec_to_model(spec: PhantomSpec) -> PhantomSpecModel:
    regions = [
        EllipseRegionModel(name=r.name, center=r.center, semi_axis_a=r.semi_axis_a,
                           semi_axis_b=r.semi_axis_b, rotation=r.rotation, rsp=r.rsp,
                           z_range=r.z_range, priority=r.priority)
        for r in spec.regions
    ]
    return PhantomSpecModel(name=spec.name, description=spec.description,
                            grid=GridSpecModel.from_grid(spec.grid), regions=regions)


def load_phantom_spec(path: str) -> PhantomSpec:
    return spec_from_model(load_model(path, PhantomSpecModel))


def save_phantom_spec(spec: PhantomSpec, path: str):
    save_model(spec_to_model(spec), path)

"""
Modèles pydantic des fichiers de configuration JSON (fantôme, acquisition,
binning, seuils, pipeline).

Toutes les longueurs sont en mm, les angles de projection en degrés et les
coupures angulaires en radians.
"""
import json
import os
from typing import List, Literal, Optional, Tuple, Type, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.core.errors import ConfigError
from src.core.modules.geometry import GridSpec

ALGORITHMS = ("fbp", "sc", "msc", "sm")
ALGORITHM_LABELS = {"fbp": "FBP", "sc": "SC", "msc": "MSC", "sm": "SM"}

ModelT = TypeVar("ModelT", bound=BaseModel)


class HullScanModel(BaseModel):
    """Base commune : champs inconnus refusés, instances immuables"""
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridSpecModel(HullScanModel):
    nx: int = Field(200, ge=1)
    ny: int = Field(200, ge=1)
    nz: int = Field(1, ge=1)
    voxel_size_x: float = Field(1.0, gt=0)
    voxel_size_y: float = Field(1.0, gt=0)
    slice_thickness: float = Field(1.0, gt=0)
    # None : grille centrée sur l'isocentre
    origin: Optional[Tuple[float, float, float]] = None

    def to_grid(self) -> GridSpec:
        if self.origin is None:
            return GridSpec.centered(self.nx, self.ny, self.nz, self.voxel_size_x,
                                     self.voxel_size_y, self.slice_thickness)
        return GridSpec(self.nx, self.ny, self.nz, self.voxel_size_x,
                        self.voxel_size_y, self.slice_thickness, self.origin)

    @classmethod
    def from_grid(cls, grid: GridSpec) -> 'GridSpecModel':
        return cls(nx=grid.nx, ny=grid.ny, nz=grid.nz, voxel_size_x=grid.voxel_size_x,
                   voxel_size_y=grid.voxel_size_y, slice_thickness=grid.slice_thickness,
                   origin=grid.origin)


class EllipseRegionModel(HullScanModel):
    name: str = ""
    center: Tuple[float, float] = (0.0, 0.0)
    semi_axis_a: float = Field(gt=0)
    semi_axis_b: float = Field(gt=0)
    rotation: float = 0.0
    rsp: float = Field(ge=0)
    z_range: Optional[Tuple[float, float]] = None
    priority: int = 0

    @model_validator(mode="after")
    def _check_z_range(self):
        if self.z_range is not None and self.z_range[0] > self.z_range[1]:
            raise ValueError("z_range doit être croissant")
        return self


class PhantomSpecModel(HullScanModel):
    name: str = "neo"
    description: str = ""
    grid: GridSpecModel = GridSpecModel()
    regions: List[EllipseRegionModel] = []


class ScatterModel(HullScanModel):
    """Diffusion : lois normales bivariées (déplacement, angle) en sortie"""
    enabled: bool = True
    sigma_displacement: float = Field(0.5, ge=0)
    sigma_angle: float = Field(0.005, ge=0)
    correlation: float = Field(0.9, ge=-1, le=1)


class NoiseModel(HullScanModel):
    """Bruit WEPL gaussien, sigma(w) = sigma_base + sigma_slope * w"""
    enabled: bool = False
    sigma_base: float = Field(1.0, ge=0)
    sigma_slope: float = Field(0.02, ge=0)


class ScanConfigModel(HullScanModel):
    num_projections: int = Field(90, ge=0)
    angular_step: float = Field(4.0, gt=0)
    protons_per_projection: int = Field(16384, ge=0)
    beam_energy: str = "200 MeV"
    field_width: float = Field(200.0, gt=0)
    field_height: float = Field(30.0, gt=0)
    field_center_z: float = 0.0
    scanner_radius: float = Field(150.0, gt=0)
    wepl_mode: Literal["chord", "unit"] = "chord"
    # stratified : une position tirée dans chaque case d'une grille latérale x verticale
    sampling: Literal["stratified", "uniform"] = "stratified"
    vertical_strata: int = Field(8, ge=1)
    scatter: ScatterModel = ScatterModel()
    noise: NoiseModel = NoiseModel()
    seed: int = Field(20120917, ge=0)

    @model_validator(mode="after")
    def _check_coverage(self):
        if self.num_projections and abs(self.num_projections * self.angular_step - 360.0) > 1e-6:
            raise ValueError(
                f"{self.num_projections} projections x {self.angular_step}° ne couvrent pas 360°")
        return self

    @property
    def total_histories(self) -> int:
        return self.num_projections * self.protons_per_projection


class BinningConfigModel(HullScanModel):
    angular_bin: float = Field(4.0, gt=0)
    lateral_bin: float = Field(1.0, gt=0)
    vertical_bin: float = Field(5.0, gt=0)
    cut_sigma: float = Field(3.0, gt=0)


class AlgorithmThresholdsModel(HullScanModel):
    wepl_miss_cutoff: float = Field(1.0, ge=0)
    wepl_hit_cutoff: float = Field(5.0, ge=0)
    # None : test angulaire désactivé
    miss_angle_cutoff: Optional[float] = Field(None, ge=0)
    hit_angle_cutoff: Optional[float] = Field(None, ge=0)
    msc_Nt: int = Field(50, ge=0)
    msc_exterior_fill: bool = False
    msc_min_component: int = Field(25, ge=0)
    sc_filter_threshold: float = Field(0.4, gt=0, lt=1)
    sm_sigma: float = Field(2.0, gt=0)
    # Hystérésis, en fraction du gradient maximal de la coupe
    sm_edge_low: float = Field(0.1, ge=0, le=1)
    sm_edge_high: float = Field(0.3, ge=0, le=1)
    fbp_rsp_threshold: float = Field(0.6, ge=0)


class PipelineConfigModel(HullScanModel):
    name: str = "desk"
    # Chemin relatif au fichier de configuration du pipeline
    phantom_file: str = "neo_phantom.json"
    scan: ScanConfigModel = ScanConfigModel()
    binning: BinningConfigModel = BinningConfigModel()
    thresholds: AlgorithmThresholdsModel = AlgorithmThresholdsModel()
    reconstruction_grid: GridSpecModel = GridSpecModel(
        nx=200, ny=200, nz=8, slice_thickness=3.0, origin=(-100.0, -100.0, -12.0))
    algorithms: List[Literal["fbp", "sc", "msc", "sm"]] = list(ALGORITHMS)
    noisy: bool = False
    bench_repeats: int = Field(1, ge=1)
    # None : valeur de config.json ou valeur par défaut de l'application
    output_dir: Optional[str] = None
    threads: Optional[int] = Field(None, ge=1)
    chunk_size: int = Field(65536, ge=1)
    use_cache: Optional[bool] = None


def load_model(path: str, model_cls: Type[ModelT]) -> ModelT:
    """Lit et valide un fichier JSON ; toute erreur devient ConfigError"""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            payload = json.load(f)
        return model_cls.model_validate(payload)
    except OSError as e:
        raise ConfigError(f"Impossible de lire {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"JSON invalide dans {path}: {e}") from e
    except ValidationError as e:
        raise ConfigError(f"Configuration invalide dans {path}:\n{e}") from e


def save_model(model: BaseModel, path: str):
    """Écrit un modèle en JSON indenté"""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(model.model_dump_json(indent=2))
        f.write("\n")


def override(model: ModelT, **changes) -> ModelT:
    """Copie validée d'un modèle avec les valeurs non nulles de changes"""
    values = {k: v for k, v in changes.items() if v is not None}
    if not values:
        return model
    try:
        return type(model).model_validate({**model.model_dump(), **values})
    except ValidationError as e:
        raise ConfigError(f"Valeurs invalides: {e}") from e

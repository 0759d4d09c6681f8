"""
Pipeline complet : fantôme -> simulation -> coupures -> détection de
l'enveloppe par chaque algorithme -> comparaison à la vérité -> rapports.

Les étapes s'enchaînent séquentiellement ; chacune utilise le parallélisme
interne des modules. Une erreur d'étape est relancée en StageError portant
le nom de l'étape.
"""
import json
import logging
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np

from src.config.models import (ALGORITHM_LABELS, AlgorithmThresholdsModel, PipelineConfigModel,
                               ScanConfigModel, override)
from src.core.errors import StageError
from src.core.modules.carving import msc_detect, sc_detect
from src.core.modules.fbp import build_sinogram, fbp_hull, fbp_reconstruct
from src.core.modules.geometry import GridSpec
from src.core.modules.history_io import write_histories
from src.core.modules.imaging import export_slice_image, write_mask
from src.core.modules.metrics import HullComparison, compare_hulls
from src.core.modules.phantom import (PhantomSpec, load_phantom_spec, rasterize_phantom,
                                      spec_to_model, truth_on_grid)
from src.core.modules.preprocessing import BinGrid, apply_data_cuts, bin_histories, bin_report
from src.core.modules.simulator import HistoryBatch, add_wepl_noise, generate_histories
from src.core.modules.space_modeling import sm_detect
from src.core.modules.volumes import HullMask, RSPGrid
from src.services.history_cache import HistoryCache
from src.services.run_journal import RunJournal

logger = logging.getLogger(__name__)



@dataclass
class DetectionInputs:
    """Données d'entrée communes aux quatre détecteurs"""
    histories: HistoryBatch     # historiques bruts : MSC et SM
    bins: BinGrid               # données coupées et regroupées : FBP et SC
    grid: GridSpec
    thresholds: AlgorithmThresholdsModel
    threads: Optional[int] = None
    chunk_size: int = 65536


@dataclass
class Detection:
    algorithm: str
    mask: HullMask
    seconds: float
    reconstruction: Optional[RSPGrid] = None


def _detect_fbp(inputs: DetectionInputs) -> Tuple[HullMask, Optional[RSPGrid]]:
    sino = build_sinogram(inputs.bins)
    recon = fbp_reconstruct(sino, inputs.grid, inputs.threads)
    hull = fbp_hull(recon, inputs.thresholds)
    hull.notes.extend(sino.notes)
    return hull, recon


def _detect_sc(inputs: DetectionInputs) -> Tuple[HullMask, Optional[RSPGrid]]:
    return sc_detect(inputs.bins, inputs.grid, inputs.thresholds, inputs.threads), None


def _detect_msc(inputs: DetectionInputs) -> Tuple[HullMask, Optional[RSPGrid]]:
    hull, _ = msc_detect(inputs.histories, inputs.grid, inputs.thresholds, inputs.threads, inputs.chunk_size)
    return hull, None


def _detect_sm(inputs: DetectionInputs) -> Tuple[HullMask, Optional[RSPGrid]]:
    hull, _ = sm_detect(inputs.histories, inputs.grid, inputs.thresholds, inputs.threads, inputs.chunk_size)
    return hull, None


DETECTORS: Dict[str, Callable[[DetectionInputs], Tuple[HullMask, Optional[RSPGrid]]]] = {
    "fbp": _detect_fbp,
    "sc": _detect_sc,
    "msc": _detect_msc,
    "sm": _detect_sm,
}


def run_detection(algorithm: str, inputs: DetectionInputs) -> Detection:
    """Exécute et chronomètre l'étape de détection seule (sans entrées/sorties)"""
    detector = DETECTORS[algorithm]
    start = time.perf_counter()
    mask, recon = detector(inputs)
    # Plancher à la résolution de l'horloge : une durée est toujours > 0
    seconds = max(time.perf_counter() - start, time.get_clock_info("perf_counter").resolution)
    logger.info("%s : détection en %.3f s, %d voxels", ALGORITHM_LABELS[algorithm], seconds, mask.count())
    return Detection(algorithm, mask, seconds, recon)


@dataclass
class PipelineResult:
    config: PipelineConfigModel
    output_dir: str
    truth: HullMask
    detections: Dict[str, Detection] = field(default_factory=dict)
    comparisons: Dict[str, HullComparison] = field(default_factory=dict)
    history_count: int = 0
    removed_by_cuts: int = 0
    warnings: List[str] = field(default_factory=list)
    artifacts: List[str] = field(default_factory=list)

    @property
    def notes(self) -> Dict[str, List[str]]:
        return {name: d.mask.notes for name, d in self.detections.items() if d.mask.notes}


def noiseless_scan(scan: ScanConfigModel) -> ScanConfigModel:
    """Acquisition sans bruit : c'est elle qui est simulée et mise en cache"""
    return scan.model_copy(update={"noise": scan.noise.model_copy(update={"enabled": False})})


def resolve_phantom_path(config: PipelineConfigModel, config_dir: Optional[str]) -> str:
    if os.path.isabs(config.phantom_file) or config_dir is None:
        return config.phantom_file
    return os.path.join(config_dir, config.phantom_file)


def simulate(phantom: PhantomSpec, scan: ScanConfigModel, threads: Optional[int] = None,
             cache: Optional[HistoryCache] = None) -> HistoryBatch:
    """Historiques sans bruit du fantôme, repris du cache si possible"""
    clean_scan = noiseless_scan(scan)
    phantom_model = spec_to_model(phantom)
    if cache is not None:
        cached = cache.get(phantom_model, clean_scan)
        if cached is not None:
            return cached
    histories = generate_histories(rasterize_phantom(phantom), clean_scan, threads)
    if cache is not None:
        cache.set(phantom_model, clean_scan, histories)
    return histories


def geometry_warnings(config: PipelineConfigModel, phantom: PhantomSpec) -> List[str]:
    """
    Défauts de géométrie qui faussent les coupes extrêmes : champ qui atteint
    les faces du fantôme (WEPL tronqués), bords du champ hors des limites des
    niveaux verticaux (niveaux extrêmes clairsemés, bins vides mis à 0).
    """
    scan = config.scan
    z_lo = scan.field_center_z - scan.field_height / 2.0
    z_hi = scan.field_center_z + scan.field_height / 2.0
    lo, hi = phantom.grid.physical_extent()
    warnings = []
    if z_lo <= lo[2] or z_hi >= hi[2]:
        warnings.append(f"Champ [{z_lo:g}, {z_hi:g}] mm non contenu dans le fantôme "
                        f"[{lo[2]:g}, {hi[2]:g}] mm : WEPL tronqués aux faces")
    step = config.binning.vertical_bin
    partial = [z for z in (z_lo, z_hi) if not np.isclose(z / step, np.round(z / step))]
    if partial:
        warnings.append(f"Bords du champ {partial} mm hors des limites des niveaux de {step:g} mm : "
                        "niveaux extrêmes partiellement remplis")
    for message in warnings:
        logger.warning(message)
    return warnings


def is_noisy(config: PipelineConfigModel) -> bool:
    return config.noisy or config.scan.noise.enabled


def noisy_copy(histories: HistoryBatch, config: PipelineConfigModel) -> HistoryBatch:
    """Copie à WEPL bruité (paramètres de bruit de l'acquisition, graine de la simulation)"""
    noise = config.scan.noise.model_copy(update={"enabled": True})
    return add_wepl_noise(histories, noise, config.scan.seed)


def prepare_inputs(histories: HistoryBatch, config: PipelineConfigModel,
                   threads: Optional[int]) -> Tuple[DetectionInputs, BinGrid]:
    """Regroupement, coupures et assemblage des entrées des détecteurs"""
    bins = bin_histories(histories, config.binning)
    _, cut_bins = apply_data_cuts(bins)
    inputs = DetectionInputs(histories, cut_bins, config.reconstruction_grid.to_grid(),
                             config.thresholds, threads, config.chunk_size)
    return inputs, cut_bins


def comparison_table(comparisons: Dict[str, HullComparison],
                     seconds: Optional[Dict[str, float]] = None) -> str:
    """
    Tableau texte : une colonne par algorithme, lignes temps (si fourni),
    voxels manquants et voxels en trop.
    """
    names = list(comparisons)
    header = f"{'':<20}" + "".join(f"{ALGORITHM_LABELS.get(n, n):>12}" for n in names)
    lines = [header]
    if seconds is not None:
        lines.append(f"{'Temps de calcul':<20}" + "".join(f"{seconds[n]:>11.3f}s" for n in names))
    lines.append(f"{'Voxels manquants':<20}" + "".join(f"{comparisons[n].missing:>12d}" for n in names))
    lines.append(f"{'Voxels en trop':<20}" + "".join(f"{comparisons[n].extra:>12d}" for n in names))
    return "\n".join(lines) + "\n"


class PipelineRunner:
    """Exécution des étapes avec journalisation et rattachement des erreurs à leur étape"""

    def __init__(self, config: PipelineConfigModel, output_dir: str, threads: Optional[int] = None,
                 cache: Optional[HistoryCache] = None, journal: Optional[RunJournal] = None,
                 on_stage: Optional[Callable[[str], None]] = None):
        self.config = config
        self.output_dir = output_dir
        self.threads = threads
        self.cache = cache
        self.journal = journal or RunJournal(os.path.join(output_dir, "journal.jsonl"))
        self.on_stage = on_stage

    @contextmanager
    def stage(self, name: str, **details) -> Iterator[Dict]:
        """Contexte d'étape : durée journalisée, toute exception devient StageError"""
        if self.on_stage is not None:
            self.on_stage(name)
        logger.info("Étape '%s'", name)
        start = time.perf_counter()
        try:
            yield details
        except StageError:
            raise
        except Exception as e:
            self.journal.log_stage(name, time.perf_counter() - start, success=False, error=e, **details)
            raise StageError(name, e) from e
        self.journal.log_stage(name, time.perf_counter() - start, **details)

    def _path(self, *parts: str) -> str:
        return os.path.join(self.output_dir, *parts)

    def _export_mask(self, name: str, mask: HullMask, result: PipelineResult):
        path = self._path("masks", f"{name}.pctm")
        write_mask(path, mask)
        result.artifacts.append(path)
        for iz in range(mask.grid.nz):
            image = self._path("images", f"{name}_z{iz:02d}.pgm")
            export_slice_image(mask.slice(iz), image, normalization=1.0)
            result.artifacts.append(image)

    def _write_text(self, name: str, content: str, result: PipelineResult) -> str:
        path = self._path(name)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(content)
        result.artifacts.append(path)
        return path

    def run(self, phantom: Optional[PhantomSpec] = None, config_dir: Optional[str] = None) -> PipelineResult:
        config = self.config
        os.makedirs(self.output_dir, exist_ok=True)
        if phantom is None:
            with self.stage("config", phantom_file=config.phantom_file):
                phantom = load_phantom_spec(resolve_phantom_path(config, config_dir))
        grid = config.reconstruction_grid.to_grid()

        with self.stage("phantom", phantom=phantom.name) as details:
            truth = truth_on_grid(phantom, grid)
            warnings = geometry_warnings(config, phantom)
            details["warnings"] = len(warnings)
        result = PipelineResult(config, self.output_dir, truth, warnings=warnings)
        self._export_mask("truth", truth, result)

        with self.stage("simulate", histories=config.scan.total_histories) as details:
            histories = simulate(phantom, config.scan, self.threads, self.cache)
            path = self._path("histories.pcth")
            write_histories(path, histories)
            result.artifacts.append(path)
            details["path"] = path

        if is_noisy(config):
            with self.stage("noise") as details:
                histories = noisy_copy(histories, config)
                path = self._path("histories_noisy.pcth")
                write_histories(path, histories)
                result.artifacts.append(path)
                details["path"] = path
        result.history_count = len(histories)

        with self.stage("cut") as details:
            inputs, cut_bins = prepare_inputs(histories, config, self.threads)
            result.removed_by_cuts = cut_bins.removed
            details["removed"] = cut_bins.removed
            self._write_text("cut_report.txt", bin_report(cut_bins), result)

        for algorithm in config.algorithms:
            with self.stage(algorithm) as details:
                detection = run_detection(algorithm, inputs)
                result.detections[algorithm] = detection
                details["seconds"] = detection.seconds
                details["voxels"] = detection.mask.count()
                self._export_mask(algorithm, detection.mask, result)
                if detection.reconstruction is not None:
                    recon = detection.reconstruction
                    for iz in range(grid.nz):
                        image = self._path("images", f"{algorithm}_rsp_z{iz:02d}.pgm")
                        export_slice_image(recon.slice(iz), image, normalization=recon.max_rsp or None)
                        result.artifacts.append(image)

        with self.stage("compare"):
            for algorithm, detection in result.detections.items():
                result.comparisons[algorithm] = compare_hulls(truth, detection.mask)

        with self.stage("report"):
            self._write_reports(result)

        return result

    def _write_reports(self, result: PipelineResult):
        config = self.config
        seconds = {name: d.seconds for name, d in result.detections.items()}
        table = comparison_table(result.comparisons)
        self._write_text("comparison.txt", table, result)

        comparison = {
            "name": config.name,
            "noisy": is_noisy(config),
            "seed": config.scan.seed,
            "histories": result.history_count,
            "removed_by_cuts": result.removed_by_cuts,
            "warnings": result.warnings,
            "truth_count": result.truth.count(),
            "algorithms": {name: c.to_dict() for name, c in result.comparisons.items()},
            "notes": result.notes,
        }
        self._write_text("comparison.json", json.dumps(comparison, indent=2) + "\n", result)

        title = f"Détection d'enveloppe : {config.name} ({'avec' if is_noisy(config) else 'sans'} bruit WEPL)"
        report = "\n".join([
            title,
            "=" * len(title),
            f"Historiques : {result.history_count} (retirés par les coupures : {result.removed_by_cuts})",
            f"Voxels de l'enveloppe vraie : {result.truth.count()}",
            "",
            comparison_table(result.comparisons, seconds),
        ])
        report += "".join(f"Avertissement : {warning}\n" for warning in result.warnings)
        for name, notes in result.notes.items():
            report += "".join(f"Note {ALGORITHM_LABELS[name]} : {note}\n" for note in notes)
        self._write_text("report.txt", report, result)

        bench = {
            "threads": self.threads,
            "histories": result.history_count,
            "grid": list(config.reconstruction_grid.to_grid().shape),
            "seconds": seconds,
        }
        self._write_text("bench.json", json.dumps(bench, indent=2) + "\n", result)


def run_pipeline(config: PipelineConfigModel, config_dir: Optional[str] = None,
                 output_dir: Optional[str] = None, threads: Optional[int] = None,
                 cache: Optional[HistoryCache] = None, journal: Optional[RunJournal] = None,
                 phantom: Optional[PhantomSpec] = None,
                 on_stage: Optional[Callable[[str], None]] = None) -> PipelineResult:
    """
    Exécute le pipeline de bout en bout et écrit ses artefacts dans output_dir.

    Le fantôme est lu depuis config.phantom_file (relatif à config_dir) sauf
    s'il est fourni directement.
    """
    output_dir = output_dir or config.output_dir or "hullscan_out"
    threads = threads if threads is not None else config.threads
    runner = PipelineRunner(config, output_dir, threads, cache, journal, on_stage)
    return runner.run(phantom, config_dir)


def select_algorithms(config: PipelineConfigModel, algorithms: Optional[List[str]]) -> PipelineConfigModel:
    """Restreint la configuration aux algorithmes demandés"""
    if not algorithms:
        return config
    return override(config, algorithms=algorithms)

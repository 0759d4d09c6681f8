"""
Chronométrage de l'étape de détection de chaque algorithme.

Seule la détection est mesurée : simulation, coupures et écritures sont
faites une fois avant les mesures. Chaque algorithme est exécuté une fois à
blanc (compilation des noyaux numba) puis repeats fois.
"""
import json
import logging
import os
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.config.models import ALGORITHM_LABELS, PipelineConfigModel
from src.core.modules.phantom import PhantomSpec, load_phantom_spec
from src.core.modules.simulator import HistoryBatch
from src.services.history_cache import HistoryCache
from src.services.pipeline_service import (DetectionInputs, is_noisy, noisy_copy,
                                           prepare_inputs, resolve_phantom_path, run_detection, simulate)

logger = logging.getLogger(__name__)

SCALING_ALGORITHMS = ("msc", "sm")


@dataclass
class AlgorithmTiming:
    seconds: List[float]

    @property
    def minimum(self) -> float:
        return min(self.seconds)

    @property
    def median(self) -> float:
        return float(np.median(self.seconds))

    def to_dict(self) -> Dict:
        return {"min": self.minimum, "median": self.median, "runs": list(self.seconds)}


@dataclass
class BenchReport:
    history_count: int
    grid_shape: Tuple[int, int, int]
    threads: Optional[int]
    repeats: int
    thresholds: Dict
    timings: Dict[str, AlgorithmTiming] = field(default_factory=dict)
    # temps(tous les historiques) / temps(moitié des historiques)
    scaling: Dict[str, float] = field(default_factory=dict)

    def ratio(self, slow: str, fast: str) -> float:
        """Rapport des temps minimaux slow / fast"""
        return self.timings[slow].minimum / self.timings[fast].minimum

    def to_dict(self) -> Dict:
        return {
            "histories": self.history_count,
            "grid": list(self.grid_shape),
            "threads": self.threads,
            "repeats": self.repeats,
            "thresholds": self.thresholds,
            "timings": {name: t.to_dict() for name, t in self.timings.items()},
            "scaling": self.scaling,
        }

    def to_text(self) -> str:
        lines = [f"{'Algorithme':<12}{'min (s)':>12}{'médiane (s)':>14}"]
        for name, timing in self.timings.items():
            lines.append(f"{ALGORITHM_LABELS[name]:<12}{timing.minimum:>12.4f}{timing.median:>14.4f}")
        for name, ratio in self.scaling.items():
            lines.append(f"Passage à l'échelle {ALGORITHM_LABELS[name]} (N / N/2) : {ratio:.2f}")
        return "\n".join(lines) + "\n"


def time_algorithm(algorithm: str, inputs: DetectionInputs, repeats: int, warm_up: bool = True) -> AlgorithmTiming:
    if warm_up:
        run_detection(algorithm, inputs)
    return AlgorithmTiming([run_detection(algorithm, inputs).seconds for _ in range(repeats)])


def benchmark_inputs(inputs: DetectionInputs, config: PipelineConfigModel, repeats: int,
                     scaling: bool = False) -> BenchReport:
    """Mesures sur des entrées déjà préparées"""
    report = BenchReport(len(inputs.histories), inputs.grid.shape, inputs.threads, repeats,
                         config.thresholds.model_dump(mode="json"))
    for algorithm in config.algorithms:
        report.timings[algorithm] = time_algorithm(algorithm, inputs, repeats)
        logger.info("%s : min %.4f s", ALGORITHM_LABELS[algorithm], report.timings[algorithm].minimum)

    if scaling:
        # Un historique sur deux : toutes les projections restent représentées
        half = replace(inputs, histories=inputs.histories[::2])
        for algorithm in SCALING_ALGORITHMS:
            if algorithm not in config.algorithms:
                continue
            half_time = time_algorithm(algorithm, half, repeats).minimum
            report.scaling[algorithm] = report.timings[algorithm].minimum / half_time
    return report


def run_benchmark(config: PipelineConfigModel, config_dir: Optional[str] = None,
                  threads: Optional[int] = None, repeats: Optional[int] = None, scaling: bool = False,
                  cache: Optional[HistoryCache] = None, phantom: Optional[PhantomSpec] = None,
                  histories: Optional[HistoryBatch] = None) -> BenchReport:
    """
    Prépare les entrées du pipeline puis chronomètre chaque algorithme.
    Des historiques déjà disponibles peuvent être fournis directement.
    """
    threads = threads if threads is not None else config.threads
    repeats = repeats or config.bench_repeats
    if histories is None:
        if phantom is None:
            phantom = load_phantom_spec(resolve_phantom_path(config, config_dir))
        histories = simulate(phantom, config.scan, threads, cache)
        if is_noisy(config):
            histories = noisy_copy(histories, config)
    inputs, _ = prepare_inputs(histories, config, threads)
    return benchmark_inputs(inputs, config, repeats, scaling)


def write_bench_report(report: BenchReport, path: str):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(report.to_dict(), f, indent=2)
        f.write("\n")

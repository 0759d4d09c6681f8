import asyncio
import os
from typing import Optional

from src.config.models import AlgorithmThresholdsModel, PipelineConfigModel, override
from src.core.modules.phantom import PhantomSpec, load_phantom_spec
from src.services.history_cache import HistoryCache
from src.services.pipeline_service import resolve_phantom_path


class BaseHandler:

    def __init__(self, config, ui):
        self.config = config
        self.ui = ui

    async def process(self, args):
        pass

    def load_pipeline(self, args) -> PipelineConfigModel:
        """Configuration de pipeline avec les options de ligne de commande appliquées"""
        pipeline = self.config.load_pipeline(args)
        if getattr(args, "seed", None) is not None:
            pipeline = override(pipeline, scan=override(pipeline.scan, seed=args.seed))
        if getattr(args, "algorithms", None):
            pipeline = override(pipeline, algorithms=args.algorithms)
        if getattr(args, "noisy", False):
            pipeline = override(pipeline, noisy=True)
        thresholds = {name: getattr(args, name, None) for name in AlgorithmThresholdsModel.model_fields}
        if any(value is not None for value in thresholds.values()):
            pipeline = override(pipeline, thresholds=override(pipeline.thresholds, **thresholds))
        return pipeline

    def load_phantom(self, args, pipeline: PipelineConfigModel) -> PhantomSpec:
        path = getattr(args, "phantom", None) or resolve_phantom_path(pipeline, self.config.pipeline_dir(args))
        return load_phantom_spec(path)

    def history_cache(self, args, pipeline: PipelineConfigModel) -> Optional[HistoryCache]:
        if not self.config.cache_enabled(args, pipeline):
            return None
        return HistoryCache(self.config.cache_dir)

    async def run_blocking(self, message: str, func, *args, **kwargs):
        """Exécute un calcul dans un thread en affichant un indicateur de progression"""
        with self.ui.create_progress(message) as progress:
            progress.add_task(message, total=None)
            return await asyncio.to_thread(func, *args, **kwargs)

    @staticmethod
    def output_path(args, default: str) -> str:
        path = getattr(args, "output", None) or default
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        return path

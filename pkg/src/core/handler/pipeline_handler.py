import os

from src.core.handler.base_handler import BaseHandler
from src.services.pipeline_service import run_pipeline
from src.services.run_journal import RunJournal


class PipelineHandler(BaseHandler):

    async def process(self, args):
        """Exécute simulation, coupures, détections, comparaison et rapports"""
        pipeline = self.load_pipeline(args)
        threads = self.config.get_threads(args, pipeline)
        output_dir = self.config.get_output_dir(args, pipeline)
        phantom = self.load_phantom(args, pipeline)
        journal = RunJournal(os.path.join(output_dir, "journal.jsonl"))

        self.ui.print_info(f"Pipeline '{pipeline.name}' : {', '.join(pipeline.algorithms)} "
                           f"sur {pipeline.scan.total_histories} historiques")
        result = await self.run_blocking(
            "Pipeline en cours", run_pipeline, pipeline, output_dir=output_dir, threads=threads,
            cache=self.history_cache(args, pipeline), journal=journal, phantom=phantom,
            on_stage=self.ui.print_stage)

        seconds = {name: d.seconds for name, d in result.detections.items()}
        self.ui.show_comparison(result.comparisons, seconds,
                                title=f"{pipeline.name} : |H| = {result.truth.count()} voxels")
        self.ui.print_notes(result.notes)
        self.ui.print_success(f"{len(result.artifacts)} fichiers écrits dans {output_dir}")
        return result

from src.config.models import ScanConfigModel, load_model
from src.core.handler.base_handler import BaseHandler
from src.core.modules.history_io import write_histories
from src.services.pipeline_service import is_noisy, noisy_copy, simulate


class SimulateHandler(BaseHandler):

    async def process(self, args):
        """Simule les historiques d'une acquisition et les écrit au format PCTH"""
        pipeline = self.load_pipeline(args)
        if args.scan:
            scan = load_model(args.scan, ScanConfigModel)
            if args.seed is not None:
                scan = scan.model_copy(update={"seed": args.seed})
            pipeline = pipeline.model_copy(update={"scan": scan})
        phantom = self.load_phantom(args, pipeline)
        threads = self.config.get_threads(args, pipeline)

        self.ui.print_info(f"Fantôme '{phantom.name}', {pipeline.scan.total_histories} historiques "
                           f"({pipeline.scan.num_projections} projections), graine {pipeline.scan.seed}")
        histories = await self.run_blocking("Simulation des historiques", simulate, phantom, pipeline.scan,
                                            threads, self.history_cache(args, pipeline))

        path = self.output_path(args, "histories.pcth")
        write_histories(path, histories)
        self.ui.print_success(f"{len(histories)} historiques écrits dans {path}")

        if is_noisy(pipeline):
            noisy_path = path[:-5] + "_noisy.pcth" if path.endswith(".pcth") else path + ".noisy"
            write_histories(noisy_path, noisy_copy(histories, pipeline))
            self.ui.print_success(f"Copie à WEPL bruité écrite dans {noisy_path}")
        return histories

from src.core.handler.base_handler import BaseHandler
from src.core.modules.history_io import read_histories
from src.services.bench_service import run_benchmark, write_bench_report


class BenchHandler(BaseHandler):

    async def process(self, args):
        """Chronomètre l'étape de détection de chaque algorithme"""
        pipeline = self.load_pipeline(args)
        threads = self.config.get_threads(args, pipeline)
        histories = read_histories(args.input) if args.input else None
        phantom = None if histories is not None else self.load_phantom(args, pipeline)

        report = await self.run_blocking(
            "Mesure des temps de détection", run_benchmark, pipeline,
            threads=threads, repeats=args.repeats, scaling=args.scaling,
            cache=self.history_cache(args, pipeline), phantom=phantom, histories=histories)
        self.ui.show_bench(report)

        if args.output:
            write_bench_report(report, args.output)
            self.ui.print_success(f"Rapport de performance sauvegardé dans: {args.output}")
        return report

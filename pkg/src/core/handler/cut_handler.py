from src.core.handler.base_handler import BaseHandler
from src.core.modules.history_io import read_histories, write_histories
from src.core.modules.preprocessing import apply_data_cuts, bin_histories, bin_report


class CutHandler(BaseHandler):

    async def process(self, args):
        """Regroupe les historiques, applique les coupures et écrit les survivants"""
        pipeline = self.load_pipeline(args)
        histories = read_histories(args.input)
        binning = pipeline.binning
        if args.cut_sigma is not None:
            binning = binning.model_copy(update={"cut_sigma": args.cut_sigma})

        bins = await self.run_blocking("Regroupement", bin_histories, histories, binning)
        survivors, cut_bins = await self.run_blocking("Coupures", apply_data_cuts, bins)
        self.ui.show_bins(cut_bins)

        path = self.output_path(args, "histories_cut.pcth")
        write_histories(path, survivors)
        self.ui.print_success(f"{len(survivors)} historiques conservés écrits dans {path}")

        if args.report:
            with open(args.report, 'w', encoding='utf-8') as f:
                f.write(bin_report(cut_bins))
            self.ui.print_success(f"Rapport de binning sauvegardé dans: {args.report}")
        return cut_bins

import os

from src.config.models import ALGORITHM_LABELS
from src.core.handler.base_handler import BaseHandler
from src.core.modules.history_io import read_histories
from src.core.modules.imaging import export_slice_image, write_mask
from src.services.pipeline_service import prepare_inputs, run_detection


class HullHandler(BaseHandler):

    async def process(self, args):
        """Calcule l'enveloppe d'un fichier d'historiques avec un algorithme"""
        pipeline = self.load_pipeline(args)
        threads = self.config.get_threads(args, pipeline)
        histories = read_histories(args.input)

        inputs, _ = await self.run_blocking("Coupures", prepare_inputs, histories, pipeline, threads)
        label = ALGORITHM_LABELS[args.algorithm]
        detection = await self.run_blocking(f"Détection {label}", run_detection, args.algorithm, inputs)
        mask = detection.mask

        path = self.output_path(args, f"{args.algorithm}.pctm")
        write_mask(path, mask)
        self.ui.print_notes({args.algorithm: mask.notes})
        self.ui.print_success(f"{label} : {mask.count()} voxels en {detection.seconds:.3f} s, masque écrit dans {path}")

        if args.images:
            for iz in range(mask.grid.nz):
                export_slice_image(mask.slice(iz), os.path.join(args.images, f"{args.algorithm}_z{iz:02d}.pgm"), 1.0)
            self.ui.print_info(f"{mask.grid.nz} coupes exportées dans {args.images}")
        return detection

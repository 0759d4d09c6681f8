import json
import os

from src.core.handler.base_handler import BaseHandler
from src.core.modules.imaging import read_mask
from src.core.modules.metrics import compare_hulls
from src.core.modules.phantom import load_phantom_spec, truth_on_grid


class CompareHandler(BaseHandler):

    async def process(self, args):
        """Compare des masques à l'enveloppe vraie (masque ou fantôme rasterisé)"""
        approximations = {os.path.splitext(os.path.basename(path))[0]: read_mask(path) for path in args.masks}
        if args.truth:
            truth = read_mask(args.truth)
        else:
            grid = next(iter(approximations.values())).grid
            truth = truth_on_grid(load_phantom_spec(args.phantom), grid)

        comparisons = {name: compare_hulls(truth, mask) for name, mask in approximations.items()}
        self.ui.show_comparison(comparisons)
        if args.per_slice:
            for name, comparison in comparisons.items():
                self.ui.show_slice_breakdown(name, comparison)

        if args.output:
            payload = {"truth_count": truth.count(),
                       "algorithms": {name: c.to_dict() for name, c in comparisons.items()}}
            with open(args.output, 'w', encoding='utf-8') as f:
                json.dump(payload, f, indent=2)
                f.write("\n")
            self.ui.print_success(f"Comparaison sauvegardée dans: {args.output}")
        return comparisons

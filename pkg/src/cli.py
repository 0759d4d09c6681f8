import logging
import signal
import sys
import traceback
from typing import List, Optional

from rich.logging import RichHandler

from src.config.config import HullScanConfig
from src.core.errors import HullScanError
from src.core.handler.bench_handler import BenchHandler
from src.core.handler.compare_handler import CompareHandler
from src.core.handler.cut_handler import CutHandler
from src.core.handler.hull_handler import HullHandler
from src.core.handler.pipeline_handler import PipelineHandler
from src.core.handler.simulate_handler import SimulateHandler
from src.core.router import Router
from src.core.setup import HullScanSetupAssistant
from src.core.ui import UI

VERSION = "1.0.0"

# Code de sortie des erreurs non prévues
UNEXPECTED_EXIT_CODE = 1


def configure_logging(debug: bool, console=None):
    """RichHandler sur le logger racine : DEBUG avec --debug, WARNING sinon"""
    root = logging.getLogger()
    for handler in list(root.handlers):
        if isinstance(handler, RichHandler):
            root.removeHandler(handler)
    root.addHandler(RichHandler(console=console, show_path=debug, rich_tracebacks=debug))
    root.setLevel(logging.DEBUG if debug else logging.WARNING)
    # numba est très bavard au niveau DEBUG
    logging.getLogger("numba").setLevel(logging.WARNING)


class HullScanCli:
    """Classe principale de l'application"""

    def __init__(self, config: Optional[HullScanConfig] = None):
        """Initialise l'application"""
        signal.signal(signal.SIGINT, self._handle_sigint)
        self.ui = UI()
        self.config = config or HullScanConfig()
        self.parser = HullScanSetupAssistant.setup_argparse(self.config)
        self.router = Router()

    def _handle_sigint(self, signal, frame):
        """Gère l'interruption par CTRL+C"""
        self.ui.print_warning("\nOpération annulée par l'utilisateur.")
        sys.exit(130)

    def _register_routes(self):
        handlers = {
            "simulate": (SimulateHandler, "Simuler les historiques de protons"),
            "cut": (CutHandler, "Regrouper et couper les historiques"),
            "hull": (HullHandler, "Calculer une enveloppe"),
            "compare": (CompareHandler, "Comparer des masques à la vérité"),
            "bench": (BenchHandler, "Chronométrer les algorithmes"),
            "pipeline": (PipelineHandler, "Pipeline complet"),
        }
        for command, (handler_cls, description) in handlers.items():
            handler = handler_cls(self.config, self.ui)
            self.router.add_route(command, handler.process, description)

    def _report_error(self, error: Exception, debug: bool) -> int:
        if isinstance(error, HullScanError):
            self.ui.print_error(f"Erreur: {error}")
            code = error.exit_code
        else:
            self.ui.print_error(f"Erreur inattendue: {type(error).__name__}: {error}")
            code = UNEXPECTED_EXIT_CODE
        if debug:
            self.ui.console.print("".join(traceback.format_exception(type(error), error, error.__traceback__)))
        return code

    async def run(self, argv: Optional[List[str]] = None) -> int:
        """Point d'entrée principal ; renvoie le code de sortie"""
        args = self.parser.parse_args(argv)
        self.ui.quiet = args.quiet
        configure_logging(args.debug, self.ui.console)

        if args.version:
            self.ui.console.print(f"hullscan v{VERSION}")
            return 0

        if args.setup:
            await HullScanSetupAssistant(self.config, self.ui).setup()
            return 0

        if not args.command:
            self.parser.print_help()
            return 0

        self._register_routes()
        success, result = await self.router.dispatch(args.command, args)
        if success:
            return 0
        return self._report_error(result, args.debug)

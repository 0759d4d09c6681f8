import argparse
import textwrap

from rich.panel import Panel
from rich.prompt import Confirm, IntPrompt, Prompt

from src.config.config import HullScanConfig
from src.config.models import ALGORITHMS
from src.core.ui import UI

# Seuils réglables en ligne de commande : (champ, options, type, aide)
THRESHOLD_OPTIONS = (
    ("msc_Nt", ("--msc-nt", "--n-t"), int, "Seuil N_t de MSC"),
    ("wepl_miss_cutoff", ("--wepl-miss-cutoff", "--c-t"), float, "WEPL (mm) sous lequel un proton est manqué"),
    ("wepl_hit_cutoff", ("--wepl-hit-cutoff",), float, "WEPL (mm) au-delà duquel un proton a traversé l'objet"),
    ("miss_angle_cutoff", ("--miss-angle-cutoff",), float, "Déviation maximale (rad) d'un proton manqué"),
    ("hit_angle_cutoff", ("--hit-angle-cutoff",), float, "Déviation minimale (rad) d'un proton traversant"),
    ("msc_min_component", ("--msc-min-component",), int, "Taille minimale (voxels) d'une composante MSC"),
    ("sc_filter_threshold", ("--sc-filter-threshold", "--f-t"), float, "Seuil après le filtre 5x5 de SC"),
    ("sm_sigma", ("--sm-sigma",), float, "Écart-type (voxels) du lissage de SM"),
    ("sm_edge_low", ("--sm-edge-low",), float, "Seuil bas de l'hystérésis de SM"),
    ("sm_edge_high", ("--sm-edge-high",), float, "Seuil haut de l'hystérésis de SM"),
    ("fbp_rsp_threshold", ("--fbp-rsp-threshold", "--fbp-t"), float, "Seuil RSP de FBP"),
)


class HullScanSetupAssistant:
    """Assistant de configuration des préférences utilisateur"""

    def __init__(self, config: HullScanConfig, ui: UI):
        """Initialise l'assistant de configuration"""
        self.config = config
        self.ui = ui

    def _configure_threads(self):
        current = self.config.get("default_threads")
        self.ui.console.print(f"Threads par défaut: [cyan]{current or 'tous les cœurs'}[/cyan]")
        if Confirm.ask("Souhaitez-vous modifier cette valeur?", default=False):
            while True:
                threads = IntPrompt.ask("Nombre de threads (0 = tous les cœurs)", default=0)
                if threads >= 0:
                    self.config.set("default_threads", threads or None)
                    break
                self.ui.print_error("La valeur doit être positive ou nulle.")

    def _configure_output(self):
        current = self.config.get("default_output_dir", HullScanConfig.DEFAULT_OUTPUT_DIR)
        output_dir = Prompt.ask("Répertoire de sortie par défaut", default=current)
        self.config.set("default_output_dir", output_dir)

    def _configure_cache(self):
        enabled = Confirm.ask("Réutiliser les historiques déjà simulés (cache)?",
                              default=bool(self.config.get("use_cache", True)))
        self.config.set("use_cache", enabled)

    async def setup(self):
        """Lance l'assistant de configuration"""
        self.ui.console.print(Panel.fit(
            "[bold]Assistant de configuration hullscan[/bold]\n\n"
            f"Les préférences sont enregistrées dans {self.config.config_file}.",
            title="Configuration",
            border_style="blue"
        ))
        self._configure_threads()
        self._configure_output()
        self._configure_cache()
        self.config.save_config()
        self.ui.print_success("Configuration terminée et sauvegardée avec succès!")

    @staticmethod
    def _add_threshold_options(parser: argparse.ArgumentParser):
        group = parser.add_argument_group("Seuils (remplacent ceux de la configuration)")
        for name, flags, kind, help_text in THRESHOLD_OPTIONS:
            group.add_argument(*flags, dest=name, type=kind, metavar="VALEUR", help=help_text)

    @staticmethod
    def _add_pipeline_options(parser: argparse.ArgumentParser):
        parser.add_argument(
            "--algorithms", "-a",
            nargs="+",
            choices=ALGORITHMS,
            help="Algorithmes à exécuter"
        )
        parser.add_argument(
            "--noisy",
            action="store_true",
            help="Ajouter le bruit WEPL"
        )
        parser.add_argument(
            "--phantom", "-p",
            metavar="FICHIER",
            help="Fantôme (JSON)"
        )

    @staticmethod
    def setup_argparse(config: HullScanConfig):
        """Configure le parseur d'arguments"""
        desc = "hullscan - Détection de l'enveloppe d'un objet en tomographie proton"
        parser = argparse.ArgumentParser(
            prog="hullscan",
            description=desc,
            formatter_class=argparse.RawDescriptionHelpFormatter,
            epilog=textwrap.dedent("""
            Exemples d'utilisation:
              hullscan pipeline                              # Pipeline complet (config/pipeline_desk.json)
              hullscan --config config/pipeline_desk_noisy.json pipeline -o out_noisy
              hullscan simulate -o histories.pcth
              hullscan cut -i histories.pcth -o cut.pcth --report bins.txt
              hullscan hull -i histories.pcth -A msc -o msc.pctm --images images/
              hullscan compare --phantom config/neo_phantom.json msc.pctm sm.pctm
              hullscan bench --repeats 5 --scaling
            """)
        )

        # Options globales
        global_group = parser.add_argument_group('Options globales')
        global_group.add_argument(
            "--config", "-c",
            metavar="FICHIER",
            help=f"Configuration de pipeline (JSON, défaut : {config.shipped_config(config.DEFAULT_PIPELINE)})"
        )
        global_group.add_argument(
            "--seed",
            type=int,
            help="Graine de la simulation"
        )
        global_group.add_argument(
            "--threads", "-j",
            type=int,
            help="Nombre de threads (0 = tous les cœurs)"
        )
        global_group.add_argument(
            "--no-cache",
            action="store_true",
            help="Ignorer le cache d'historiques"
        )
        global_group.add_argument(
            "--debug", "-d",
            action="store_true",
            help="Mode débogage"
        )
        global_group.add_argument(
            "--quiet", "-q",
            action="store_true",
            help="Sortie réduite"
        )

        util_group = parser.add_argument_group('Utilitaires')
        util_group.add_argument(
            "--setup",
            action="store_true",
            help="Configuration"
        )
        util_group.add_argument(
            "--version", "-v",
            action="store_true",
            help="Version"
        )

        subparsers = parser.add_subparsers(dest="command", metavar="COMMANDE")

        simulate = subparsers.add_parser("simulate", help="Simuler les historiques de protons")
        simulate.add_argument("--scan", metavar="FICHIER", help="Acquisition (JSON)")
        simulate.add_argument("--output", "-o", metavar="FICHIER", help="Fichier d'historiques (.pcth)")
        simulate.add_argument("--phantom", "-p", metavar="FICHIER", help="Fantôme (JSON)")
        simulate.add_argument("--noisy", action="store_true", help="Écrire aussi une copie à WEPL bruité")

        cut = subparsers.add_parser("cut", help="Regrouper les historiques et appliquer les coupures")
        cut.add_argument("--input", "-i", required=True, metavar="FICHIER", help="Historiques (.pcth)")
        cut.add_argument("--output", "-o", metavar="FICHIER", help="Historiques conservés (.pcth)")
        cut.add_argument("--cut-sigma", type=float, help="Nombre d'écarts-types des coupures")
        cut.add_argument("--report", metavar="FICHIER", help="Rapport de binning (texte)")

        hull = subparsers.add_parser("hull", help="Calculer une enveloppe")
        hull.add_argument("--input", "-i", required=True, metavar="FICHIER", help="Historiques (.pcth)")
        hull.add_argument("--algorithm", "-A", required=True, choices=ALGORITHMS, help="Algorithme")
        hull.add_argument("--output", "-o", metavar="FICHIER", help="Masque (.pctm)")
        hull.add_argument("--images", metavar="DOSSIER", help="Exporter les coupes en PGM")
        HullScanSetupAssistant._add_threshold_options(hull)

        compare = subparsers.add_parser("compare", help="Comparer des masques à l'enveloppe vraie")
        truth = compare.add_mutually_exclusive_group(required=True)
        truth.add_argument("--truth", "-t", metavar="FICHIER", help="Masque de vérité (.pctm)")
        truth.add_argument("--phantom", "-p", metavar="FICHIER", help="Fantôme (JSON) rasterisé sur la grille")
        compare.add_argument("masks", nargs="+", metavar="MASQUE", help="Masques à évaluer (.pctm)")
        compare.add_argument("--per-slice", action="store_true", help="Détail par coupe")
        compare.add_argument("--output", "-o", metavar="FICHIER", help="Résultat (JSON)")

        bench = subparsers.add_parser("bench", help="Chronométrer les algorithmes")
        HullScanSetupAssistant._add_pipeline_options(bench)
        bench.add_argument("--input", "-i", metavar="FICHIER", help="Historiques (.pcth) au lieu d'une simulation")
        bench.add_argument("--repeats", "-r", type=int, help="Nombre de répétitions")
        bench.add_argument("--scaling", action="store_true", help="Mesurer MSC et SM sur N/2 et N historiques")
        bench.add_argument("--output", "-o", metavar="FICHIER", help="Rapport (JSON)")
        HullScanSetupAssistant._add_threshold_options(bench)

        pipeline = subparsers.add_parser("pipeline", help="Exécuter le pipeline complet")
        HullScanSetupAssistant._add_pipeline_options(pipeline)
        pipeline.add_argument("--output", "-o", metavar="DOSSIER", help="Répertoire de sortie")
        HullScanSetupAssistant._add_threshold_options(pipeline)

        return parser

from typing import Dict, List, Optional

import numpy as np
from rich import box
from rich.console import Console
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn, TimeElapsedColumn
from rich.table import Table
from rich.theme import Theme

from src.config.models import ALGORITHM_LABELS
from src.core.modules.metrics import HullComparison
from src.core.modules.preprocessing import BinGrid



class UI:
    """Gestion de l'interface utilisateur"""

    def __init__(self, quiet: bool = False, console: Optional[Console] = None):
        """Initialise l'interface utilisateur"""
        custom_theme = Theme({
            "error": "bold red",
            "warning": "yellow",
            "info": "blue",
            "success": "green",
            "stage": "bold cyan",
        })

        self.console = console or Console(theme=custom_theme)
        self.quiet = quiet

    def print_success(self, message: str):
        """Affiche un message de réussite"""
        self.console.print(f"[success]{message}[/success]")

    def print_error(self, message: str):
        """Affiche un message d'erreur"""
        self.console.print(f"[error]{message}[/error]")

    def print_warning(self, message: str):
        """Affiche un message d'avertissement"""
        self.console.print(f"[warning]{message}[/warning]")

    def print_info(self, message: str):
        """Affiche un message d'information (masqué par --quiet)"""
        if not self.quiet:
            self.console.print(f"[info]{message}[/info]")

    def print_stage(self, stage: str):
        if not self.quiet:
            self.console.print(f"[stage]▶ {stage}[/stage]")

    def print_notes(self, notes: Dict[str, List[str]]):
        """Remarques non bloquantes renvoyées par les algorithmes"""
        for name, messages in notes.items():
            for message in messages:
                self.print_warning(f"{ALGORITHM_LABELS.get(name, name)} : {message}")

    def create_progress(self, message: str = "Calcul en cours...", transient: bool = True) -> Progress:
        """Crée une barre de progression"""
        return Progress(
            SpinnerColumn(),
            TextColumn(f"[info]{message}[/info]"),
            TimeElapsedColumn(),
            transient=transient,
            disable=self.quiet,
            console=self.console,
        )

    def show_comparison(self, comparisons: Dict[str, HullComparison], seconds: Optional[Dict[str, float]] = None,
                        title: str = "Comparaison à l'enveloppe vraie"):
        """Tableau temps / voxels manquants / voxels en trop, une colonne par algorithme"""
        table = Table(title=title, box=box.SIMPLE_HEAVY)
        table.add_column("")
        for name in comparisons:
            table.add_column(ALGORITHM_LABELS.get(name, name), justify="right")
        if seconds is not None:
            table.add_row("Temps de calcul", *[f"{seconds[name]:.3f} s" for name in comparisons])
        table.add_row("Voxels manquants", *[str(c.missing) for c in comparisons.values()])
        table.add_row("Voxels en trop", *[str(c.extra) for c in comparisons.values()])
        table.add_row("|H'|", *[str(c.approx_count) for c in comparisons.values()])
        self.console.print(table)

    def show_slice_breakdown(self, name: str, comparison: HullComparison):
        table = Table(title=f"{ALGORITHM_LABELS.get(name, name)} : détail par coupe", box=box.SIMPLE)
        table.add_column("Coupe", justify="right")
        table.add_column("Manquants", justify="right")
        table.add_column("En trop", justify="right")
        for iz, (missing, extra) in enumerate(zip(comparison.missing_per_slice, comparison.extra_per_slice)):
            table.add_row(str(iz), str(int(missing)), str(int(extra)))
        self.console.print(table)

    def show_bench(self, report):
        """Tableau des temps de détection (min et médiane)"""
        table = Table(title=f"Temps de détection ({report.repeats} répétitions, {report.history_count} historiques)",
                      box=box.SIMPLE_HEAVY)
        table.add_column("Algorithme")
        table.add_column("min (s)", justify="right")
        table.add_column("médiane (s)", justify="right")
        for name, timing in report.timings.items():
            table.add_row(ALGORITHM_LABELS.get(name, name), f"{timing.minimum:.4f}", f"{timing.median:.4f}")
        self.console.print(table)
        for name, ratio in report.scaling.items():
            self.print_info(f"Passage à l'échelle {ALGORITHM_LABELS.get(name, name)} : N / (N/2) = {ratio:.2f}")

    def show_bins(self, bins: BinGrid):
        """Occupation des bins par angle de projection"""
        total = len(bins.histories) + bins.removed
        self.console.print(Panel.fit(
            f"Historiques retenus : [bold]{len(bins.histories)}[/bold]\n"
            f"Historiques retirés : [bold]{bins.removed}[/bold] "
            f"({100.0 * bins.removed / total if total else 0.0:.2f} %)\n"
            f"Bins occupés : [bold]{len(bins)}[/bold]",
            title="Coupures", border_style="blue"))
        if self.quiet or not len(bins):
            return
        table = Table(box=box.SIMPLE)
        table.add_column("Angle (°)", justify="right")
        table.add_column("Bins", justify="right")
        table.add_column("Historiques", justify="right")
        table.add_column("WEPL moyen (mm)", justify="right")
        for ia in np.unique(bins.keys[:, 0]):
            sel = bins.keys[:, 0] == ia
            weights = bins.counts[sel]
            table.add_row(f"{ia * bins.config.angular_bin:.1f}", str(int(sel.sum())), str(int(weights.sum())),
                          f"{np.average(bins.wepl.mean[sel], weights=weights):.3f}")
        self.console.print(table)

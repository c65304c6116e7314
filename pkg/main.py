#!/usr/bin/env python3
"""
Simulateur de marché de requêtes et tarification dynamique par bandits gaussiens

Point d'entrée principal : exécute des scénarios, balaye des graines et
pilote un prix en continu (mode control, protocole NDJSON).

Usage:
    python main.py simulate --scenario FICHIER [--seed N] [--out DOSSIER] [--plots LISTE]
    python main.py sweep --scenario FICHIER --seeds N [--out DOSSIER] [--workers N]
    python main.py control --state FICHIER [--agent-config FICHIER] [--window-seconds S]
"""

import argparse
import logging
import sys
import os

# Ajouter le dossier parent au path pour les imports
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src import __version__
from src.config import DEFAULT_WINDOW_SECONDS, Settings, ensure_directories, setup_logging
from src.commands import cmd_control, cmd_simulate, cmd_sweep
from src.plot_data import PLOT_KINDS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Simulateur de marché multi-agents et contrôleur de prix par bandit gaussien."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="Logs détaillés (DEBUG)")
    parser.add_argument("--quiet", action="store_true", help="Supprime la ligne de résumé")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="Exécute un scénario")
    simulate.add_argument("--scenario", required=True, help="Fichier de scénario JSON (ou nom d'un scénario fourni)")
    simulate.add_argument("--seed", type=int, default=None, help="Remplace la graine du scénario")
    simulate.add_argument("--out", default=None, help="Dossier de sortie (défaut: output/<scénario>)")
    simulate.add_argument(
        "--plots",
        default="",
        help=f"Types de tracés séparés par des virgules ({', '.join(PLOT_KINDS)} ; policyDensity@PAS)",
    )

    sweep = sub.add_parser("sweep", help="Exécute un scénario pour les graines 0..N-1")
    sweep.add_argument("--scenario", required=True, help="Fichier de scénario JSON")
    sweep.add_argument("--seeds", type=int, required=True, help="Nombre de graines")
    sweep.add_argument("--out", default=None, help="Dossier de sortie")
    sweep.add_argument("--workers", type=int, default=None, help="Processus parallèles")
    sweep.add_argument("--plots", default="", help="Types de tracés par graine")

    control = sub.add_parser("control", help="Pilote un prix en continu (NDJSON sur stdin/stdout)")
    control.add_argument("--agent-config", default=None, help="Configuration du bandit (démarrage à froid)")
    control.add_argument("--state", required=True, help="Fichier d'état (reprise s'il existe)")
    control.add_argument(
        "--window-seconds",
        type=float,
        default=DEFAULT_WINDOW_SECONDS,
        help=f"Durée d'une fenêtre d'agrégation (défaut: {DEFAULT_WINDOW_SECONDS:g} s)",
    )
    return parser


def main(argv=None) -> int:
    """Fonction principale du simulateur."""
    args = build_parser().parse_args(argv)
    settings = Settings.load()

    # Parser le niveau de log
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    else:
        level = getattr(logging, settings.log_level.upper(), logging.INFO)
    setup_logging(level, settings.log_file)

    # S'assurer que les dossiers existent
    ensure_directories()

    plots = [p for p in getattr(args, "plots", "").split(",") if p.strip()]
    if args.command == "simulate":
        return cmd_simulate(args.scenario, out=args.out, seed=args.seed, plots=plots, quiet=args.quiet,
                            output_root=settings.output_dir)
    if args.command == "sweep":
        workers = args.workers if args.workers is not None else settings.sweep_workers
        return cmd_sweep(args.scenario, args.seeds, out=args.out, workers=workers, plots=plots, quiet=args.quiet,
                         output_root=settings.output_dir)
    return cmd_control(args.state, agent_config=args.agent_config, window_seconds=args.window_seconds)


if __name__ == "__main__":
    sys.exit(main())

"""
Commandes de la ligne de commande : simulate, sweep et control.

Chaque commande retourne un code de sortie : 0 succès, 1 erreur de lecture,
de validation ou fichier manquant, 2 erreur d'exécution de la simulation.
"""

import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from concurrent.futures.process import BrokenProcessPool
from pathlib import Path
from typing import Any, Dict, FrozenSet, List, Optional, Sequence, TextIO, Union

from .config import DEFAULT_WINDOW_SECONDS, OUTPUT_DIR
from .controller import open_controller
from .csv_handler import summary_row, write_aggregate, write_metrics
from .errors import NonFiniteGradientError, ScenarioError, SimulationFault, StateFileError
from .plot_data import PlotRequest, emit_plot_data
from .scenario_io import load_scenario
from .simulation import BanditSpec, ScenarioConfig, ScenarioSummary, StochasticSpec, run_scenario, summarize
from .utils import format_float

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_FAULT = 2

AGGREGATE_CSV = "aggregate.csv"


def _log_space_labels(config: ScenarioConfig) -> FrozenSet[str]:
    labels = set()
    for spec in config.agents:
        if isinstance(spec, BanditSpec) and spec.config.log_space:
            labels.add(spec.label)
        elif isinstance(spec, StochasticSpec) and spec.log_space:
            labels.add(spec.label)
    return frozenset(labels)


def summary_line(config: ScenarioConfig, summary: ScenarioSummary) -> str:
    """Résumé sur une ligne : revenus, requêtes abandonnées, pas de convergence."""
    revenues = ", ".join(f"{label}={format_float(a.total_revenue)}" for label, a in summary.agents.items())
    convergence = ", ".join(
        f"{label}={'-' if a.convergence_step is None else a.convergence_step}"
        for label, a in summary.agents.items()
        if a.final_snapshot is not None
    )
    line = f"{config.name or 'scénario'} (graine {config.seed}) : revenus {revenues} ; abandonnées {format_float(summary.dropped_total)}"
    if convergence:
        line += f" ; convergence {convergence}"
    return line


def execute(config: ScenarioConfig, out: Union[str, Path], plots: Sequence[str] = ()) -> ScenarioSummary:
    """Exécute un scénario et écrit métriques et données de tracé dans out."""
    requests = [PlotRequest.parse(p) for p in plots]
    records = run_scenario(config)
    write_metrics(records, out)
    log_space = _log_space_labels(config)
    for request in requests:
        emit_plot_data(records, request, Path(out) / "plots", config.price_bounds, log_space)
    return summarize(records, config.convergence_band, config.convergence_hold)


def _report(exc: Exception) -> int:
    if isinstance(exc, SimulationFault):
        print(f"Erreur d'exécution au pas {exc.step} : {exc.cause}", file=sys.stderr)
        return EXIT_FAULT
    if isinstance(exc, FileNotFoundError):
        print(f"Fichier introuvable : {exc}", file=sys.stderr)
    elif isinstance(exc, (ScenarioError, StateFileError)):
        print(f"Configuration invalide : {exc}", file=sys.stderr)
    else:
        print(f"Erreur : {exc}", file=sys.stderr)
    return EXIT_INPUT


def cmd_simulate(
    scenario: Union[str, Path],
    out: Union[str, Path, None] = None,
    seed: Optional[int] = None,
    plots: Sequence[str] = (),
    quiet: bool = False,
    output_root: Union[str, Path] = OUTPUT_DIR,
) -> int:
    try:
        config = load_scenario(scenario)
        if seed is not None:
            config = config.with_seed(seed)
        out = Path(out) if out else Path(output_root) / (config.name or "run")
        summary = execute(config, out, plots)
    except (SimulationFault, ScenarioError, ValueError, OSError) as exc:
        return _report(exc)

    if not quiet:
        print(summary_line(config, summary))
    return EXIT_OK


def _run_seed(config: ScenarioConfig, seed: int, out: Path, plots: Sequence[str]) -> Dict[str, Any]:
    seeded = config.with_seed(seed)
    summary = execute(seeded, out / f"seed_{seed}", plots)
    return summary_row(seed, summary)


def cmd_sweep(
    scenario: Union[str, Path],
    seeds: int,
    out: Union[str, Path, None] = None,
    workers: int = 1,
    plots: Sequence[str] = (),
    quiet: bool = False,
    output_root: Union[str, Path] = OUTPUT_DIR,
) -> int:
    """
    Exécute le scénario pour les graines 0..seeds-1, chacune dans
    out/seed_<k>/, puis écrit out/aggregate.csv trié par graine.
    La première erreur interrompt le balayage.
    """
    try:
        if seeds < 1:
            raise ScenarioError("doit être >= 1", path="--seeds")
        config = load_scenario(scenario)
        out = Path(out) if out else Path(output_root) / f"{config.name or 'run'}_sweep"
        for p in plots:
            PlotRequest.parse(p)

        rows: List[Dict[str, Any]] = []
        if workers <= 1:
            for seed in range(seeds):
                rows.append(_run_seed(config, seed, out, plots))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_run_seed, config, seed, out, plots) for seed in range(seeds)]
                try:
                    for future in futures:
                        rows.append(future.result())
                except BaseException:
                    for future in futures:
                        future.cancel()
                    raise
        path = write_aggregate(rows, out / AGGREGATE_CSV)
    except (SimulationFault, ScenarioError, ValueError, OSError) as exc:
        return _report(exc)
    except BrokenProcessPool as exc:
        print(f"Erreur d'exécution : processus du balayage interrompu ({exc})", file=sys.stderr)
        return EXIT_FAULT

    logger.info("Balayage terminé : %d graines, agrégat %s", seeds, path)
    if not quiet:
        print(f"{config.name or 'scénario'} : {seeds} graines, agrégat {path}")
    return EXIT_OK


def cmd_control(
    state: Union[str, Path],
    agent_config: Union[str, Path, None] = None,
    window_seconds: float = DEFAULT_WINDOW_SECONDS,
    input_stream: Optional[TextIO] = None,
    output_stream: Optional[TextIO] = None,
) -> int:
    """Boucle de contrôle NDJSON sur l'entrée et la sortie standard."""
    try:
        controller = open_controller(agent_config, state, window_seconds)
    except (StateFileError, ScenarioError, ValueError, OSError) as exc:
        return _report(exc)

    try:
        emitted = controller.run(input_stream or sys.stdin, output_stream or sys.stdout)
    except NonFiniteGradientError as exc:
        return _report(SimulationFault(controller.step, exc))
    logger.info("Fin du flux d'entrée : %d prix émis", emitted)
    return EXIT_OK

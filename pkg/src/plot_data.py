"""
Génération des fichiers de données de tracé (compatibles gnuplot) à partir
des templates Jinja2 : un fichier par série, un manifeste et une recette
gnuplot par type de tracé.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import jinja2
import numpy as np

from .config import DENSITY_GRID_POINTS, TEMPLATES_DIR
from .market import PriceBounds
from .policy import GaussianPolicyParams, density
from .simulation import StepRecord
from .utils import format_float

logger = logging.getLogger(__name__)

PLOT_KINDS = ("policyTrace", "servedVolumes", "revenueRate", "totalRevenue", "policyDensity")

SERIES_TEMPLATE = "series.dat.j2"
MANIFEST_TEMPLATE = "manifest.txt.j2"
RECIPE_TEMPLATE = "recipe.gp.j2"

DROPPED_SERIES = "dropped"


@dataclass
class Series:
    name: str
    file: str
    columns: List[str]
    rows: List[Sequence[float]]
    plot_column: int = 2


@dataclass
class PlotRequest:
    kind: str
    step: Optional[int] = None

    @classmethod
    def parse(cls, text: str) -> "PlotRequest":
        """'policyTrace', 'policyDensity@999' ou 'policyDensity' (dernier pas)."""
        kind, _, step = text.strip().partition("@")
        if kind not in PLOT_KINDS:
            raise ValueError(f"type de tracé inconnu '{kind}' (attendu : {', '.join(PLOT_KINDS)})")
        if step and kind != "policyDensity":
            raise ValueError(f"'{kind}' n'accepte pas de pas")
        try:
            return cls(kind, int(step) if step else None)
        except ValueError:
            raise ValueError(f"pas invalide dans '{text}'") from None


@dataclass
class PlotOutput:
    kind: str
    files: List[Path] = field(default_factory=list)


def _environment() -> jinja2.Environment:
    env = jinja2.Environment(
        loader=jinja2.FileSystemLoader(str(TEMPLATES_DIR)),
        autoescape=False,
        trim_blocks=True,
        keep_trailing_newline=True,
    )
    env.filters["fmt"] = format_float
    return env


def _bandit_labels(records: List[StepRecord]) -> List[str]:
    labels = list(records[0].per_agent)
    with_snapshots = {label for r in records for label in r.policy_snapshots}
    return [label for label in labels if label in with_snapshots]


def _policy_trace(records: List[StepRecord]) -> List[Series]:
    series = []
    for label in _bandit_labels(records):
        rows = [
            (r.step, r.policy_snapshots[label].mean, r.policy_snapshots[label].stddev)
            for r in records
            if label in r.policy_snapshots
        ]
        series.append(Series(label, f"policyTrace_{label}.dat", ["step", "mean", "stddev"], rows))
    return series


def _served_volumes(records: List[StepRecord]) -> List[Series]:
    series = []
    for label in records[0].per_agent:
        total, rows = 0.0, []
        for r in records:
            total += r.per_agent[label].served
            rows.append((r.step, total, r.per_agent[label].served))
        series.append(Series(label, f"servedVolumes_{label}.dat", ["step", "total_served", "served"], rows))
    total, rows = 0.0, []
    for r in records:
        total += r.dropped
        rows.append((r.step, total, r.dropped))
    series.append(Series(DROPPED_SERIES, f"servedVolumes_{DROPPED_SERIES}.dat", ["step", "total_dropped", "dropped"], rows))
    return series


def _revenue_rate(records: List[StepRecord]) -> List[Series]:
    return [
        Series(label, f"revenueRate_{label}.dat", ["step", "reward"],
               [(r.step, r.per_agent[label].reward) for r in records])
        for label in records[0].per_agent
    ]


def _total_revenue(records: List[StepRecord]) -> List[Series]:
    return [
        Series(label, f"totalRevenue_{label}.dat", ["step", "cumulative_revenue"],
               [(r.step, r.per_agent[label].cumulative_revenue) for r in records])
        for label in records[0].per_agent
    ]


def _policy_density(records: List[StepRecord], step: Optional[int], bounds: PriceBounds,
                    log_space: FrozenSet[str]) -> Tuple[int, List[Series]]:
    if step is None:
        step = records[-1].step
    record = next((r for r in records if r.step == step), None)
    if record is None or not record.policy_snapshots:
        raise ValueError(f"aucun instantané de politique au pas {step}")

    grid = np.linspace(bounds.floor, bounds.ceiling, DENSITY_GRID_POINTS)
    series = []
    for label, snap in record.policy_snapshots.items():
        params = GaussianPolicyParams.from_stddev(snap.mean, snap.stddev)
        values = density(params, grid, label in log_space)
        series.append(Series(label, f"policyDensity_{step}_{label}.dat", ["price", "density"],
                             list(zip(grid.tolist(), values.tolist()))))
    return step, series


RECIPE_LABELS: Dict[str, Tuple[str, str, str]] = {
    "policyTrace": ("Moyenne des politiques des bandits", "pas", "prix moyen"),
    "servedVolumes": ("Requêtes servies (cumul) et requêtes abandonnées", "pas", "requêtes"),
    "revenueRate": ("Revenu par pas", "pas", "revenu"),
    "totalRevenue": ("Revenu total", "pas", "revenu cumulé"),
    "policyDensity": ("Densité des politiques", "prix", "densité"),
}


def emit_plot_data(
    records: List[StepRecord],
    request: Union[str, PlotRequest],
    destination: Union[str, Path],
    bounds: PriceBounds,
    log_space: FrozenSet[str] = frozenset(),
) -> PlotOutput:
    """
    Écrit les séries d'un type de tracé dans destination, avec un manifeste
    listant les séries et une recette gnuplot.
    """
    if not records:
        raise ValueError("aucun enregistrement à tracer")
    if isinstance(request, str):
        request = PlotRequest.parse(request)

    kind = request.kind
    if kind == "policyTrace":
        series = _policy_trace(records)
    elif kind == "servedVolumes":
        series = _served_volumes(records)
    elif kind == "revenueRate":
        series = _revenue_rate(records)
    elif kind == "totalRevenue":
        series = _total_revenue(records)
    else:
        step, series = _policy_density(records, request.step, bounds, log_space)
        kind = f"policyDensity_{step}"

    title, xlabel, ylabel = RECIPE_LABELS[request.kind]
    destination = Path(destination)
    env = _environment()
    output = PlotOutput(kind)
    try:
        destination.mkdir(parents=True, exist_ok=True)
        for s in series:
            path = destination / s.file
            path.write_text(
                env.get_template(SERIES_TEMPLATE).render(title=f"{title} : {s.name}", columns=s.columns, rows=s.rows),
                encoding="utf-8",
            )
            output.files.append(path)
        manifest = destination / f"{kind}.manifest"
        manifest.write_text(env.get_template(MANIFEST_TEMPLATE).render(kind=kind, series=series), encoding="utf-8")
        recipe = destination / f"{kind}.gp"
        recipe.write_text(
            env.get_template(RECIPE_TEMPLATE).render(kind=kind, title=title, xlabel=xlabel, ylabel=ylabel, series=series),
            encoding="utf-8",
        )
        output.files.extend([manifest, recipe])
    except OSError as exc:
        raise OSError(f"écriture impossible dans '{destination}' : {exc}") from exc

    logger.info("Données de tracé '%s' : %d séries dans %s", kind, len(series), destination)
    return output

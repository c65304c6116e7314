"""
Écriture et relecture des métriques : CSV plat (une ligne par pas) et flux
NDJSON (un objet JSON par pas) pour un rechargement sans perte.
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Union

import pandas as pd

from .config import FLOAT_FORMAT
from .policy import PolicySnapshot
from .simulation import AgentStep, ScenarioSummary, StepRecord

logger = logging.getLogger(__name__)

METRICS_CSV = "metrics.csv"
RECORDS_NDJSON = "records.ndjson"
AGENT_COLUMNS = ("bid", "served", "reward", "cumrev", "mean", "stddev")


def agent_labels(records: List[StepRecord]) -> List[str]:
    """Labels dans l'ordre de déclaration des agents."""
    return list(records[0].per_agent)


def metrics_columns(labels: List[str]) -> List[str]:
    columns = ["step", "volume", "budget", "dropped"]
    for label in labels:
        columns.extend(f"{prefix}_{label}" for prefix in AGENT_COLUMNS)
    return columns


def records_to_dataframe(records: List[StepRecord]) -> pd.DataFrame:
    """
    Une ligne par pas ; mean/stddev sont les paramètres de l'action brute
    (espace log-prix en mode log), vides hors instantané et pour les agents fixes.
    """
    labels = agent_labels(records)
    rows = []
    for record in records:
        row: Dict[str, Any] = {
            "step": record.step,
            "volume": record.volume,
            "budget": record.budget,
            "dropped": record.dropped,
        }
        for label in labels:
            agent = record.per_agent[label]
            snap = record.policy_snapshots.get(label)
            row[f"bid_{label}"] = agent.bid
            row[f"served_{label}"] = agent.served
            row[f"reward_{label}"] = agent.reward
            row[f"cumrev_{label}"] = agent.cumulative_revenue
            row[f"mean_{label}"] = snap.mean if snap else math.nan
            row[f"stddev_{label}"] = snap.stddev if snap else math.nan
        rows.append(row)
    df = pd.DataFrame(rows, columns=metrics_columns(labels))
    return df.astype({column: float for column in df.columns if column != "step"})


def record_to_dict(record: StepRecord) -> Dict[str, Any]:
    return {
        "step": record.step,
        "volume": record.volume,
        "budget": record.budget,
        "dropped": record.dropped,
        "agents": {
            label: {
                "bid": a.bid,
                "served": a.served,
                "reward": a.reward,
                "cumulativeRevenue": a.cumulative_revenue,
            }
            for label, a in record.per_agent.items()
        },
        "snapshots": {
            label: {"mean": s.mean, "stddev": s.stddev, "step": s.step, "logSpace": s.log_space}
            for label, s in record.policy_snapshots.items()
        },
    }


def record_from_dict(data: Dict[str, Any]) -> StepRecord:
    return StepRecord(
        step=int(data["step"]),
        volume=float(data["volume"]),
        budget=float(data["budget"]),
        per_agent={
            label: AgentStep(float(a["bid"]), float(a["served"]), float(a["reward"]), float(a["cumulativeRevenue"]))
            for label, a in data["agents"].items()
        },
        dropped=float(data["dropped"]),
        policy_snapshots={
            label: PolicySnapshot(float(s["mean"]), float(s["stddev"]), int(s["step"]), bool(s["logSpace"]))
            for label, s in data["snapshots"].items()
        },
    )


def write_metrics(records: List[StepRecord], destination: Union[str, Path]) -> Dict[str, Path]:
    """
    Écrit metrics.csv et records.ndjson dans le dossier destination.
    UTF-8, fins de ligne LF, flottants sur 9 chiffres significatifs.
    """
    if not records:
        raise ValueError("aucun enregistrement à écrire")
    destination = Path(destination)
    csv_path = destination / METRICS_CSV
    ndjson_path = destination / RECORDS_NDJSON
    try:
        destination.mkdir(parents=True, exist_ok=True)
        records_to_dataframe(records).to_csv(
            csv_path,
            index=False,
            float_format=FLOAT_FORMAT,
            na_rep="",
            lineterminator="\n",
            encoding="utf-8",
        )
        with open(ndjson_path, "w", encoding="utf-8", newline="\n") as f:
            for record in records:
                f.write(json.dumps(record_to_dict(record), separators=(",", ":"), allow_nan=False))
                f.write("\n")
    except OSError as exc:
        raise OSError(f"écriture impossible dans '{destination}' : {exc}") from exc

    logger.info("Métriques écrites : %s, %s", csv_path, ndjson_path)
    return {"csv": csv_path, "ndjson": ndjson_path}


def load_records(path: Union[str, Path]) -> List[StepRecord]:
    """Recharge les StepRecord depuis le flux NDJSON."""
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                records.append(record_from_dict(json.loads(line)))
    return records


def load_metrics(path: Union[str, Path]) -> pd.DataFrame:
    """Charge le CSV des métriques dans un DataFrame."""
    return pd.read_csv(path, sep=",", encoding="utf-8")


def summary_row(seed: int, summary: ScenarioSummary) -> Dict[str, Any]:
    """Ligne de l'agrégat d'un balayage de graines."""
    row: Dict[str, Any] = {"seed": seed, "dropped_total": summary.dropped_total}
    for label, agent in summary.agents.items():
        row[f"final_mean_{label}"] = agent.final_snapshot.mean if agent.final_snapshot else math.nan
        row[f"final_price_{label}"] = agent.final_snapshot.central_price if agent.final_snapshot else math.nan
        row[f"total_served_{label}"] = agent.total_served
        row[f"total_revenue_{label}"] = agent.total_revenue
        row[f"convergence_step_{label}"] = agent.convergence_step
    return row


def write_aggregate(rows: List[Dict[str, Any]], path: Union[str, Path]) -> Path:
    """Écrit l'agrégat des résumés par graine (une ligne par graine)."""
    path = Path(path)
    df = pd.DataFrame(rows).sort_values("seed")
    convergence = [c for c in df.columns if c.startswith("convergence_step_")]
    df[convergence] = df[convergence].astype("Int64")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"écriture impossible de '{path}' : {exc}") from exc
    return path

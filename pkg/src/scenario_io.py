"""
Lecture, validation et écriture des fichiers de scénario (JSON).

Toute clé inconnue est refusée ; chaque erreur nomme le chemin de la clé
fautive (ex. agents[0].stddev) ou la règle sémantique violée. Les valeurs
par défaut appliquées sont consignées dans `ScenarioConfig.provenance`.
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from .agents import BanditConfig, OptimizerKind, PullTrigger, UpdateRule
from .config import (
    BANDIT_DEFAULTS,
    DEFAULT_CONVERGENCE_BAND,
    DEFAULT_SNAPSHOT_EVERY,
    DEFAULT_STEPS,
    SCENARIOS_DIR,
    SCHEMA_VERSION,
)
from .environment import DistributorKind, DistributorSpec, Schedule, TrafficConfig
from .errors import ScenarioError
from .market import PriceBounds
from .policy import GaussianPolicyParams
from .simulation import AgentSpec, BanditSpec, DeterministicSpec, ScenarioConfig, StochasticSpec

logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = {
    "schemaVersion", "name", "steps", "seed", "priceBounds", "traffic",
    "distributor", "agents", "snapshotEvery", "convergenceBand", "convergenceHold",
}
TRAFFIC_KEYS = {"baseVolume", "noiseStddev", "budgetSchedule", "volumeSchedule"}
BANDIT_KEYS = {"kind", "label", "initialMean", "initialStddev", "initialScaleParam"} | set(BANDIT_DEFAULTS)
AGENT_KEYS = {
    "deterministic": {"kind", "label", "price"},
    "stochastic": {"kind", "label", "mean", "stddev", "logSpace"},
    "bandit": BANDIT_KEYS,
}
CONTROLLER_KEYS = {"schemaVersion", "seed", "priceBounds", "agent"}


class _Reader:
    """Accès typés aux champs d'un document, avec suivi des valeurs par défaut."""

    def __init__(self):
        self.provenance: List[str] = []

    @staticmethod
    def check_keys(obj: Any, allowed: set, path: str) -> Dict[str, Any]:
        if not isinstance(obj, dict):
            raise ScenarioError("un objet JSON est attendu", path=path or "$")
        unknown = sorted(set(obj) - allowed)
        if unknown:
            prefix = f"{path}." if path else ""
            raise ScenarioError("clé inconnue", path=f"{prefix}{unknown[0]}")
        return obj

    def get(self, obj: Dict[str, Any], key: str, path: str, default: Any = ...) -> Any:
        if key in obj:
            return obj[key]
        if default is ...:
            raise ScenarioError("clé obligatoire manquante", path=path)
        self.provenance.append(f"{path} = {json.dumps(default)} (défaut)")
        return default

    def number(self, obj, key, path, default: Any = ..., minimum: Optional[float] = None,
               exclusive: bool = False) -> float:
        value = self.get(obj, key, path, default)
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ScenarioError("un nombre fini est attendu", path=path)
        if minimum is not None and (value <= minimum if exclusive else value < minimum):
            raise ScenarioError(f"doit être {'>' if exclusive else '>='} {minimum}", path=path)
        return float(value)

    def integer(self, obj, key, path, default: Any = ..., minimum: Optional[int] = None) -> int:
        value = self.get(obj, key, path, default)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioError("un entier est attendu", path=path)
        if minimum is not None and value < minimum:
            raise ScenarioError(f"doit être >= {minimum}", path=path)
        return value

    def boolean(self, obj, key, path, default: Any = ...) -> bool:
        value = self.get(obj, key, path, default)
        if not isinstance(value, bool):
            raise ScenarioError("un booléen est attendu", path=path)
        return value

    def choice(self, obj, key, path, enum_cls, default: Any = ...):
        value = self.get(obj, key, path, default)
        try:
            return enum_cls(value)
        except ValueError:
            allowed = ", ".join(member.value for member in enum_cls)
            raise ScenarioError(f"valeur inconnue '{value}' (attendu : {allowed})", path=path) from None


def _parse_bounds(reader: _Reader, document: Dict[str, Any]) -> PriceBounds:
    raw = reader.check_keys(reader.get(document, "priceBounds", "priceBounds"), {"floor", "ceiling"}, "priceBounds")
    floor = reader.number(raw, "floor", "priceBounds.floor", minimum=0)
    ceiling = reader.number(raw, "ceiling", "priceBounds.ceiling")
    if not ceiling > floor:
        raise ScenarioError("doit être strictement supérieur à priceBounds.floor", path="priceBounds.ceiling")
    return PriceBounds(floor, ceiling)


def _parse_schedule(reader: _Reader, entries: Any, path: str, value_key: str) -> Schedule:
    if not isinstance(entries, list) or not entries:
        raise ScenarioError("une liste non vide est attendue", path=path)
    segments = []
    for i, entry in enumerate(entries):
        entry_path = f"{path}[{i}]"
        reader.check_keys(entry, {"fromStep", value_key}, entry_path)
        start = reader.integer(entry, "fromStep", f"{entry_path}.fromStep", minimum=0)
        value = reader.number(entry, value_key, f"{entry_path}.{value_key}", minimum=0)
        segments.append((start, value))
    if segments[0][0] != 0:
        raise ScenarioError("le premier segment doit commencer au pas 0", path=f"{path}[0].fromStep")
    for i in range(1, len(segments)):
        if segments[i][0] <= segments[i - 1][0]:
            raise ScenarioError("fromStep doit être strictement croissant", path=f"{path}[{i}].fromStep")
    return Schedule(tuple(segments))


def _parse_traffic(reader: _Reader, document: Dict[str, Any]) -> TrafficConfig:
    raw = reader.check_keys(reader.get(document, "traffic", "traffic"), TRAFFIC_KEYS, "traffic")
    volume_entries = reader.get(raw, "volumeSchedule", "traffic.volumeSchedule", [{"fromStep": 0, "multiplier": 1.0}])
    return TrafficConfig(
        base_volume=reader.number(raw, "baseVolume", "traffic.baseVolume", minimum=0),
        noise_stddev=reader.number(raw, "noiseStddev", "traffic.noiseStddev", 0.0, minimum=0),
        budget_schedule=_parse_schedule(reader, reader.get(raw, "budgetSchedule", "traffic.budgetSchedule"),
                                        "traffic.budgetSchedule", "budget"),
        volume_schedule=_parse_schedule(reader, volume_entries, "traffic.volumeSchedule", "multiplier"),
    )


def _parse_distributor(reader: _Reader, document: Dict[str, Any]) -> DistributorSpec:
    raw = reader.check_keys(reader.get(document, "distributor", "distributor"), {"kind", "temperature"}, "distributor")
    kind = reader.choice(raw, "kind", "distributor.kind", DistributorKind)
    temperature = None
    if "temperature" in raw:
        temperature = reader.number(raw, "temperature", "distributor.temperature", minimum=0, exclusive=True)
    elif kind is DistributorKind.SOFTMAX_NEG_PRICE:
        raise ScenarioError("clé obligatoire pour softmaxNegPrice", path="distributor.temperature")
    return DistributorSpec(kind, temperature)


def _parse_bandit(reader: _Reader, raw: Dict[str, Any], path: str, bounds: PriceBounds) -> BanditConfig:
    d = BANDIT_DEFAULTS
    mean = reader.number(raw, "initialMean", f"{path}.initialMean")
    if "initialStddev" in raw and "initialScaleParam" in raw:
        raise ScenarioError("initialStddev et initialScaleParam sont exclusifs", path=f"{path}.initialScaleParam")
    if "initialScaleParam" in raw:
        initial = GaussianPolicyParams(mean, reader.number(raw, "initialScaleParam", f"{path}.initialScaleParam"))
    else:
        stddev = reader.number(raw, "initialStddev", f"{path}.initialStddev", minimum=0, exclusive=True)
        initial = GaussianPolicyParams.from_stddev(mean, stddev)

    baseline_decay = reader.number(raw, "baselineDecay", f"{path}.baselineDecay", d["baselineDecay"], minimum=0)
    if baseline_decay >= 1:
        raise ScenarioError("doit être < 1", path=f"{path}.baselineDecay")

    return BanditConfig(
        initial_params=initial,
        bounds=bounds,
        update_rule=reader.choice(raw, "updateRule", f"{path}.updateRule", UpdateRule, d["updateRule"]),
        learning_rate=reader.number(raw, "learningRate", f"{path}.learningRate", d["learningRate"], 0, True),
        clip_epsilon=reader.number(raw, "clipEpsilon", f"{path}.clipEpsilon", d["clipEpsilon"], 0, True),
        buffer_capacity=reader.integer(raw, "bufferCapacity", f"{path}.bufferCapacity", d["bufferCapacity"], 1),
        epochs_per_update=reader.integer(raw, "epochsPerUpdate", f"{path}.epochsPerUpdate", d["epochsPerUpdate"], 1),
        baseline_decay=baseline_decay,
        pull_rate=reader.number(raw, "pullRate", f"{path}.pullRate", d["pullRate"], 0, True),
        no_reward_window=reader.integer(raw, "noRewardWindow", f"{path}.noRewardWindow", d["noRewardWindow"], 1),
        pull_trigger=reader.choice(raw, "pullTrigger", f"{path}.pullTrigger", PullTrigger, d["pullTrigger"]),
        optimizer=reader.choice(raw, "optimizer", f"{path}.optimizer", OptimizerKind, d["optimizer"]),
        min_stddev=reader.number(raw, "minStddev", f"{path}.minStddev", d["minStddev"], 0, True),
        log_space=reader.boolean(raw, "logSpace", f"{path}.logSpace", d["logSpace"]),
        max_grad_norm=reader.number(raw, "maxGradNorm", f"{path}.maxGradNorm", d["maxGradNorm"], 0, True),
        scale_rewards=reader.boolean(raw, "scaleRewards", f"{path}.scaleRewards", d["scaleRewards"]),
    )


def _parse_agent(reader: _Reader, raw: Any, path: str, bounds: PriceBounds) -> AgentSpec:
    if not isinstance(raw, dict):
        raise ScenarioError("un objet JSON est attendu", path=path)
    kind = reader.get(raw, "kind", f"{path}.kind")
    if kind not in AGENT_KEYS:
        raise ScenarioError(f"type d'agent inconnu '{kind}' (attendu : {', '.join(AGENT_KEYS)})", path=f"{path}.kind")
    reader.check_keys(raw, AGENT_KEYS[kind], path)
    label = reader.get(raw, "label", f"{path}.label")
    if not isinstance(label, str) or not label or "," in label or any(c.isspace() for c in label):
        raise ScenarioError("label non vide, sans espace ni virgule, attendu", path=f"{path}.label")

    if kind == "deterministic":
        price = reader.number(raw, "price", f"{path}.price", minimum=0)
        if not bounds.contains(price):
            raise ScenarioError(f"doit être dans [{bounds.floor}, {bounds.ceiling}]", path=f"{path}.price")
        return DeterministicSpec(label=label, price=price)
    if kind == "stochastic":
        return StochasticSpec(
            label=label,
            mean=reader.number(raw, "mean", f"{path}.mean"),
            stddev=reader.number(raw, "stddev", f"{path}.stddev", minimum=0, exclusive=True),
            log_space=reader.boolean(raw, "logSpace", f"{path}.logSpace", False),
        )
    return BanditSpec(label=label, config=_parse_bandit(reader, raw, path, bounds))


def parse_scenario(document: Union[str, Dict[str, Any]], name: str = "") -> ScenarioConfig:
    """Valide un document de scénario et retourne la configuration correspondante."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"JSON invalide : {exc}", path="$") from exc

    reader = _Reader()
    reader.check_keys(document, TOP_LEVEL_KEYS, "")
    version = reader.integer(document, "schemaVersion", "schemaVersion", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"version de schéma non supportée (attendu {SCHEMA_VERSION})", path="schemaVersion")

    bounds = _parse_bounds(reader, document)
    agents_raw = reader.get(document, "agents", "agents")
    if not isinstance(agents_raw, list):
        raise ScenarioError("une liste est attendue", path="agents")

    hold = reader.get(document, "convergenceHold", "convergenceHold", None)
    if hold is not None:
        hold = reader.integer(document, "convergenceHold", "convergenceHold", minimum=1)

    config = ScenarioConfig(
        steps=reader.integer(document, "steps", "steps", DEFAULT_STEPS, minimum=1),
        seed=reader.integer(document, "seed", "seed", 0, minimum=0),
        traffic=_parse_traffic(reader, document),
        distributor=_parse_distributor(reader, document),
        agents=tuple(_parse_agent(reader, raw, f"agents[{i}]", bounds) for i, raw in enumerate(agents_raw)),
        price_bounds=bounds,
        snapshot_every=reader.integer(document, "snapshotEvery", "snapshotEvery", DEFAULT_SNAPSHOT_EVERY, minimum=1),
        convergence_band=reader.number(document, "convergenceBand", "convergenceBand",
                                       DEFAULT_CONVERGENCE_BAND, 0, True),
        convergence_hold=hold,
        name=reader.get(document, "name", "name", name),
        provenance=tuple(reader.provenance),
    )
    config.validate()
    for note in config.provenance:
        logger.debug("%s", note)
    return config


def _serialize_agent(spec: AgentSpec) -> Dict[str, Any]:
    if isinstance(spec, DeterministicSpec):
        return {"kind": spec.kind, "label": spec.label, "price": spec.price}
    if isinstance(spec, StochasticSpec):
        return {"kind": spec.kind, "label": spec.label, "mean": spec.mean, "stddev": spec.stddev,
                "logSpace": spec.log_space}
    return serialize_bandit(spec.label, spec.config)


def serialize_bandit(label: str, config: BanditConfig) -> Dict[str, Any]:
    return {
        "kind": "bandit",
        "label": label,
        "initialMean": config.initial_params.mean,
        "initialScaleParam": config.initial_params.scale_param,
        "updateRule": config.update_rule.value,
        "learningRate": config.learning_rate,
        "clipEpsilon": config.clip_epsilon,
        "bufferCapacity": config.buffer_capacity,
        "epochsPerUpdate": config.epochs_per_update,
        "baselineDecay": config.baseline_decay,
        "pullRate": config.pull_rate,
        "noRewardWindow": config.no_reward_window,
        "pullTrigger": config.pull_trigger.value,
        "optimizer": config.optimizer.value,
        "minStddev": config.min_stddev,
        "logSpace": config.log_space,
        "maxGradNorm": config.max_grad_norm,
        "scaleRewards": config.scale_rewards,
    }


def serialize_scenario(config: ScenarioConfig) -> Dict[str, Any]:
    """Document JSON complet (toutes les clés explicites) d'une configuration."""
    distributor: Dict[str, Any] = {"kind": config.distributor.kind.value}
    if config.distributor.temperature is not None:
        distributor["temperature"] = config.distributor.temperature
    document: Dict[str, Any] = {
        "schemaVersion": SCHEMA_VERSION,
        "name": config.name,
        "steps": config.steps,
        "seed": config.seed,
        "priceBounds": {"floor": config.price_bounds.floor, "ceiling": config.price_bounds.ceiling},
        "traffic": {
            "baseVolume": config.traffic.base_volume,
            "noiseStddev": config.traffic.noise_stddev,
            "budgetSchedule": [{"fromStep": s, "budget": v} for s, v in config.traffic.budget_schedule.segments],
            "volumeSchedule": [{"fromStep": s, "multiplier": v} for s, v in config.traffic.volume_schedule.segments],
        },
        "distributor": distributor,
        "agents": [_serialize_agent(spec) for spec in config.agents],
        "snapshotEvery": config.snapshot_every,
        "convergenceBand": config.convergence_band,
    }
    if config.convergence_hold is not None:
        document["convergenceHold"] = config.convergence_hold
    return document


def resolve_scenario_path(path: Union[str, Path]) -> Path:
    """Chemin du scénario ; repli sur le dossier des scénarios fournis."""
    path = Path(path)
    if path.exists():
        return path
    bundled = SCENARIOS_DIR / path.name
    if bundled.exists():
        return bundled
    raise FileNotFoundError(f"scénario introuvable : {path}")


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    """Lit et valide un fichier de scénario."""
    path = resolve_scenario_path(path)
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    return parse_scenario(text, name=path.stem)


def parse_controller_config(document: Union[str, Dict[str, Any]]) -> Tuple[str, BanditConfig, int]:
    """
    Configuration du mode control : un seul bandit.
    Retourne (label, configuration du bandit, graine).
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"JSON invalide : {exc}", path="$") from exc
    reader = _Reader()
    reader.check_keys(document, CONTROLLER_KEYS, "")
    version = reader.integer(document, "schemaVersion", "schemaVersion", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"version de schéma non supportée (attendu {SCHEMA_VERSION})", path="schemaVersion")
    seed = reader.integer(document, "seed", "seed", 0, minimum=0)
    bounds = _parse_bounds(reader, document)
    spec = _parse_agent(reader, reader.get(document, "agent", "agent"), "agent", bounds)
    if not isinstance(spec, BanditSpec):
        raise ScenarioError("le mode control exige un agent de type bandit", path="agent.kind")
    return spec.label, spec.config, seed

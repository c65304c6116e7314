"""
Environnement : générateur de trafic et distributeurs de requêtes.

Le générateur produit à chaque pas un volume normalisé bruité (bruit blanc
gaussien additif) et le budget des consommateurs. Le distributeur (modèle
de l'algorithme de sélection des Indexers) répartit ce volume entre les
agents dont le prix ne dépasse pas le budget ; le reste est abandonné.
"""

import bisect
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from .agents import AgentId
from .errors import ScenarioError
from .market import Budget, Price, QueryVolume


@dataclass(frozen=True)
class Schedule:
    """Fonction constante par morceaux : segments (from_step, valeur) triés, le premier à 0."""

    segments: Tuple[Tuple[int, float], ...]

    def __post_init__(self):
        if not self.segments:
            raise ScenarioError("le planning doit contenir au moins un segment")
        starts = [start for start, _ in self.segments]
        if starts[0] != 0:
            raise ScenarioError("le premier segment doit commencer au pas 0")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ScenarioError("les segments doivent être triés par fromStep strictement croissant")

    @classmethod
    def constant(cls, value: float) -> "Schedule":
        return cls(((0, float(value)),))

    def value_at(self, step: int) -> float:
        starts = [start for start, _ in self.segments]
        return self.segments[bisect.bisect_right(starts, step) - 1][1]


@dataclass(frozen=True)
class TrafficConfig:
    base_volume: QueryVolume
    noise_stddev: float
    budget_schedule: Schedule
    volume_schedule: Schedule = field(default_factory=lambda: Schedule.constant(1.0))

    def __post_init__(self):
        if self.base_volume < 0:
            raise ScenarioError("doit être >= 0", path="traffic.baseVolume")
        if self.noise_stddev < 0:
            raise ScenarioError("doit être >= 0", path="traffic.noiseStddev")


class DistributorKind(str, Enum):
    SINGLE_AGENT_THRESHOLD = "singleAgentThreshold"
    BUDGET_FILTERED_UNIFORM = "budgetFilteredUniform"
    INVERSE_PROPORTIONAL = "inverseProportional"
    SOFTMAX_NEG_PRICE = "softmaxNegPrice"


@dataclass(frozen=True)
class DistributorSpec:
    kind: DistributorKind
    temperature: Optional[float] = None

    def __post_init__(self):
        if self.kind is DistributorKind.SOFTMAX_NEG_PRICE:
            if self.temperature is None or not self.temperature > 0:
                raise ScenarioError("softmaxNegPrice exige une température > 0", path="distributor.temperature")


BidSet = List[Tuple[AgentId, Price]]


@dataclass
class AllocationResult:
    served: Dict[AgentId, QueryVolume]
    dropped: QueryVolume

    def total(self) -> QueryVolume:
        return sum(self.served.values()) + self.dropped


def generate_traffic(config: TrafficConfig, step: int, rng: np.random.Generator) -> Tuple[QueryVolume, Budget]:
    """
    Volume = max(0, base * multiplicateur(pas) + N(0, bruit)) ; budget = planning(pas).
    Le bruit est tiré à chaque pas (même nul) pour garder le flux aligné.
    """
    noise = float(rng.normal(0.0, config.noise_stddev))
    volume = max(0.0, config.base_volume * config.volume_schedule.value_at(step) + noise)
    return volume, config.budget_schedule.value_at(step)


def _inverse_weights(prices: np.ndarray) -> np.ndarray:
    zero = prices == 0
    if np.any(zero):
        # limite p -> 0 : les enchères nulles se partagent tout le volume
        return zero.astype(float)
    return 1.0 / prices


def _softmax_weights(prices: np.ndarray, temperature: float) -> np.ndarray:
    return np.exp(-(prices - prices.min()) / temperature)


def distribute(spec: DistributorSpec, bids: BidSet, volume: QueryVolume, budget: Budget) -> AllocationResult:
    """
    Répartit le volume entre les agents éligibles (prix <= budget). Si aucun
    agent n'est éligible, tout le volume est abandonné.
    """
    kind = spec.kind
    if kind is DistributorKind.SINGLE_AGENT_THRESHOLD and len(bids) != 1:
        raise ScenarioError(
            f"singleAgentThreshold exige exactement un agent ({len(bids)} reçus)",
            rule="singleAgentThreshold",
        )

    served: Dict[AgentId, QueryVolume] = {agent_id: 0.0 for agent_id, _ in bids}
    eligible = [(agent_id, price) for agent_id, price in bids if price <= budget]
    if not eligible or volume == 0:
        return AllocationResult(served=served, dropped=volume if not eligible else 0.0)

    prices = np.array([price for _, price in eligible], dtype=float)
    if kind in (DistributorKind.SINGLE_AGENT_THRESHOLD, DistributorKind.BUDGET_FILTERED_UNIFORM):
        weights = np.ones_like(prices)
    elif kind is DistributorKind.INVERSE_PROPORTIONAL:
        weights = _inverse_weights(prices)
    else:
        weights = _softmax_weights(prices, spec.temperature)

    shares = weights / weights.sum()
    for (agent_id, _), share in zip(eligible, shares):
        served[agent_id] = volume * float(share)
    return AllocationResult(served=served, dropped=0.0)


def is_conserved(result: AllocationResult, volume: QueryVolume, rel_tol: float = 1e-9) -> bool:
    return math.isclose(result.total(), volume, rel_tol=rel_tol, abs_tol=1e-12)

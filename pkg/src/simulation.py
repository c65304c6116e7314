"""
Boucle de simulation déterministe : trafic, enchères, répartition,
récompenses puis apprentissage, à chaque pas et dans cet ordre.

Tous les agents enchérissent avant qu'aucun n'apprenne (jeu à coups
simultanés). Chaque composant possède son propre flux aléatoire dérivé de la
graine maître : le trafic utilise le flux 0, l'agent i le flux i + 1.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple, Union

from .agents import (
    Agent,
    AgentId,
    BanditConfig,
    FixedDeterministicAgent,
    FixedStochasticAgent,
    GaussianBandit,
)
from .config import DEFAULT_CONVERGENCE_BAND, DEFAULT_SNAPSHOT_EVERY
from .environment import (
    DistributorKind,
    DistributorSpec,
    TrafficConfig,
    distribute,
    generate_traffic,
)
from .errors import NonFiniteGradientError, ScenarioError, SimulationFault
from .market import Budget, Price, PriceBounds, QueryVolume, Reward, agent_revenue
from .policy import PolicySnapshot
from .utils import agent_rng, traffic_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DeterministicSpec:
    label: str
    price: float
    kind: str = field(default="deterministic", init=False)


@dataclass(frozen=True)
class StochasticSpec:
    label: str
    mean: float
    stddev: float
    log_space: bool = False
    kind: str = field(default="stochastic", init=False)


@dataclass(frozen=True)
class BanditSpec:
    label: str
    config: BanditConfig
    kind: str = field(default="bandit", init=False)


AgentSpec = Union[DeterministicSpec, StochasticSpec, BanditSpec]


@dataclass(frozen=True)
class ScenarioConfig:
    """Configuration complète d'une expérience."""

    steps: int
    seed: int
    traffic: TrafficConfig
    distributor: DistributorSpec
    agents: Tuple[AgentSpec, ...]
    price_bounds: PriceBounds
    snapshot_every: int = DEFAULT_SNAPSHOT_EVERY
    convergence_band: float = DEFAULT_CONVERGENCE_BAND
    convergence_hold: Optional[int] = None
    name: str = ""
    # valeurs par défaut appliquées lors de la lecture (hors comparaison)
    provenance: Tuple[str, ...] = field(default=(), compare=False)

    def validate(self) -> None:
        if self.steps < 1:
            raise ScenarioError("doit être >= 1", path="steps")
        if not 0 <= self.seed < 2 ** 64:
            raise ScenarioError("doit être un entier non signé 64 bits", path="seed")
        if self.snapshot_every < 1:
            raise ScenarioError("doit être >= 1", path="snapshotEvery")
        if not self.agents:
            raise ScenarioError("au moins un agent est requis", rule="atLeastOneAgent")
        if self.distributor.kind is DistributorKind.SINGLE_AGENT_THRESHOLD and len(self.agents) != 1:
            raise ScenarioError(
                f"singleAgentThreshold exige exactement un agent ({len(self.agents)} déclarés)",
                rule="singleAgentThreshold",
            )
        labels = [spec.label for spec in self.agents]
        if len(set(labels)) != len(labels):
            raise ScenarioError("les labels d'agents doivent être uniques", rule="uniqueLabels")

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class AgentStep:
    bid: Price
    served: QueryVolume
    reward: Reward
    cumulative_revenue: Reward


@dataclass(frozen=True)
class StepRecord:
    step: int
    volume: QueryVolume
    budget: Budget
    per_agent: Dict[str, AgentStep]
    dropped: QueryVolume
    policy_snapshots: Dict[str, PolicySnapshot]


@dataclass(frozen=True)
class AgentSummary:
    total_served: QueryVolume
    total_revenue: Reward
    final_snapshot: Optional[PolicySnapshot]
    convergence_step: Optional[int]


@dataclass(frozen=True)
class ScenarioSummary:
    steps: int
    total_volume: QueryVolume
    dropped_total: QueryVolume
    agents: Dict[str, AgentSummary]


def build_agents(config: ScenarioConfig) -> List[Agent]:
    agents: List[Agent] = []
    for index, spec in enumerate(config.agents):
        agent_id = AgentId(index=index, label=spec.label)
        if isinstance(spec, DeterministicSpec):
            agents.append(FixedDeterministicAgent(agent_id, spec.price))
        elif isinstance(spec, StochasticSpec):
            agents.append(
                FixedStochasticAgent(
                    agent_id, spec.mean, spec.stddev, config.price_bounds,
                    agent_rng(config.seed, index), spec.log_space,
                )
            )
        else:
            agents.append(GaussianBandit(agent_id, spec.config, agent_rng(config.seed, index)))
    return agents


def run_scenario(config: ScenarioConfig) -> List[StepRecord]:
    """
    Exécute le scénario pas à pas et retourne un StepRecord par pas.
    Les erreurs de configuration sont levées avant le pas 0.
    """
    config.validate()
    agents = build_agents(config)
    rng = traffic_rng(config.seed)
    cumulative = {agent.label: 0.0 for agent in agents}
    records: List[StepRecord] = []

    logger.info("Scénario '%s' : %d pas, %d agents, graine %d", config.name, config.steps, len(agents), config.seed)

    for step in range(config.steps):
        volume, budget = generate_traffic(config.traffic, step, rng)
        bids = [(agent, *agent.bid(step)) for agent in agents]
        allocation = distribute(config.distributor, [(agent.agent_id, price) for agent, price, _ in bids], volume, budget)

        per_agent: Dict[str, AgentStep] = {}
        for agent, price, raw_action in bids:
            served = allocation.served[agent.agent_id]
            reward = agent_revenue(price, served)
            try:
                agent.learn(price, raw_action, reward, step)
            except NonFiniteGradientError as exc:
                raise SimulationFault(step, exc) from exc
            cumulative[agent.label] += reward
            per_agent[agent.label] = AgentStep(price, served, reward, cumulative[agent.label])

        snapshots: Dict[str, PolicySnapshot] = {}
        if step % config.snapshot_every == 0 or step == config.steps - 1:
            for agent in agents:
                snap = agent.policy_snapshot(step)
                if snap is not None:
                    snapshots[agent.label] = snap

        records.append(StepRecord(step, volume, budget, per_agent, allocation.dropped, snapshots))

    logger.info("Scénario '%s' terminé : revenus %s", config.name,
                {label: round(value, 3) for label, value in cumulative.items()})
    return records


def convergence_step(records: List[StepRecord], label: str, band: float, hold: Optional[int] = None) -> Optional[int]:
    """
    Premier pas de convergence du prix central de la politique vers le budget
    (exp(mean) en mode log). Sans hold : premier pas après lequel
    |prix central - budget| <= band jusqu'à la fin.
    Avec hold : premier pas ouvrant `hold` instantanés consécutifs dans la bande.
    """
    points = [
        (r.step, abs(r.policy_snapshots[label].central_price - r.budget) <= band)
        for r in records
        if label in r.policy_snapshots
    ]
    if not points:
        return None

    if hold is None:
        result = None
        for step, inside in points:
            if not inside:
                result = None
            elif result is None:
                result = step
        return result

    run_start, run_length = None, 0
    for step, inside in points:
        if inside:
            if run_length == 0:
                run_start = step
            run_length += 1
            if run_length >= hold:
                return run_start
        else:
            run_length = 0
    return None


def summarize(
    records: List[StepRecord],
    band: float = DEFAULT_CONVERGENCE_BAND,
    hold: Optional[int] = None,
) -> ScenarioSummary:
    """Totaux par agent, volume abandonné, derniers instantanés et pas de convergence."""
    if not records:
        raise ValueError("aucun enregistrement à résumer")

    labels = list(records[0].per_agent)
    agents: Dict[str, AgentSummary] = {}
    for label in labels:
        final_snapshot = next(
            (r.policy_snapshots[label] for r in reversed(records) if label in r.policy_snapshots),
            None,
        )
        agents[label] = AgentSummary(
            total_served=sum(r.per_agent[label].served for r in records),
            total_revenue=records[-1].per_agent[label].cumulative_revenue,
            final_snapshot=final_snapshot,
            convergence_step=convergence_step(records, label, band, hold) if final_snapshot else None,
        )

    return ScenarioSummary(
        steps=len(records),
        total_volume=sum(r.volume for r in records),
        dropped_total=sum(r.dropped for r in records),
        agents=agents,
    )

"""
Agents du marché : agents à prix fixe (déterministes ou stochastiques) et
bandits gaussiens entraînables.

Trois règles de mise à jour pour les bandits :
- vanillaPG : un pas de gradient de politique par pas de simulation, puis vidage du buffer ;
- ppoClear : PPO classique, mise à jour quand le buffer est plein, puis vidage (on-policy) ;
- ppoRolling : PPO modifié, le buffer est tronqué à sa capacité à chaque insertion
  et n'est jamais vidé (off-policy), mise à jour à chaque pas.

Le mécanisme de rappel (« pull ») ramène la politique vers sa distribution
initiale quand la demande disparaît.
"""

import logging
import math
import sys
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Deque, Dict, Iterator, List, Optional, Tuple

import numpy as np

from .errors import NonFiniteGradientError
from .market import Price, PriceBounds, Reward
from .policy import (
    GaussianPolicyParams,
    PolicySnapshot,
    log_prob,
    log_prob_grad,
    sample_action,
    snapshot,
    to_price,
)

logger = logging.getLogger(__name__)

# Au-delà, exp(scale_param) n'est plus représentable
MAX_SCALE_PARAM = math.log(sys.float_info.max)


class UpdateRule(str, Enum):
    VANILLA_PG = "vanillaPG"
    PPO_CLEAR = "ppoClear"
    PPO_ROLLING = "ppoRolling"


class PullTrigger(str, Enum):
    ZERO_REWARD_WINDOW = "zeroRewardWindow"
    EMPTY_BUFFER = "emptyBuffer"


class OptimizerKind(str, Enum):
    ADAM = "adam"
    SGD = "sgd"


@dataclass(frozen=True)
class AgentId:
    index: int
    label: str


@dataclass(frozen=True)
class Experience:
    raw_action: float
    price: Price
    reward: Reward
    behavior_log_prob: float
    step: int


class ReplayBuffer:
    """
    Buffer d'expérience FIFO borné : au-delà de la capacité, les entrées les
    plus anciennes sont évincées à l'insertion.
    """

    def __init__(self, capacity: int, entries: Optional[List[Experience]] = None):
        if capacity < 1:
            raise ValueError("la capacité du buffer doit être positive")
        self.capacity = capacity
        self._entries: Deque[Experience] = deque(entries or [], maxlen=capacity)

    def append(self, experience: Experience) -> None:
        self._entries.append(experience)

    def clear(self) -> None:
        self._entries.clear()

    def is_full(self) -> bool:
        return len(self._entries) >= self.capacity

    def has_reward(self) -> bool:
        return any(e.reward > 0 for e in self._entries)

    def entries(self) -> List[Experience]:
        return list(self._entries)

    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(actions brutes, récompenses, log-probabilités de comportement)."""
        raw = np.fromiter((e.raw_action for e in self._entries), dtype=float, count=len(self))
        rewards = np.fromiter((e.reward for e in self._entries), dtype=float, count=len(self))
        behavior = np.fromiter((e.behavior_log_prob for e in self._entries), dtype=float, count=len(self))
        return raw, rewards, behavior

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[Experience]:
        return iter(self._entries)


@dataclass
class RewardBaseline:
    """
    Moyenne mobile exponentielle des récompenses observées (ligne de base de
    l'avantage) et plus grande récompense observée (échelle des avantages).
    """

    decay: float
    ema_value: float = 0.0
    count: int = 0
    scale: float = 0.0

    def observe(self, reward: float) -> None:
        if self.count == 0:
            self.ema_value = reward
        else:
            self.ema_value = self.decay * self.ema_value + (1.0 - self.decay) * reward
        self.count += 1
        self.scale = max(self.scale, abs(reward))


@dataclass
class OptimizerState:
    """
    Pas de montée de gradient. sgd applique le pas brut learning_rate * gradient ;
    adam normalise le gradient par paramètre (moments d'ordre 1 et 2).
    """

    kind: OptimizerKind = OptimizerKind.SGD
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray = field(default_factory=lambda: np.zeros(2))
    v: np.ndarray = field(default_factory=lambda: np.zeros(2))
    t: int = 0

    def ascent_step(self, grad: np.ndarray, learning_rate: float) -> np.ndarray:
        if self.kind is OptimizerKind.SGD:
            return learning_rate * grad
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass(frozen=True)
class BanditConfig:
    """Hyperparamètres d'un bandit gaussien (tous surchargeables par scénario)."""

    initial_params: GaussianPolicyParams
    bounds: PriceBounds
    update_rule: UpdateRule = UpdateRule.PPO_ROLLING
    learning_rate: float = 1e-2
    clip_epsilon: float = 0.2
    buffer_capacity: int = 16
    epochs_per_update: int = 4
    baseline_decay: float = 0.99
    pull_rate: float = 0.02
    no_reward_window: int = 10
    pull_trigger: PullTrigger = PullTrigger.ZERO_REWARD_WINDOW
    optimizer: OptimizerKind = OptimizerKind.SGD
    min_stddev: float = 1e-3
    log_space: bool = False
    max_grad_norm: float = 1.0
    scale_rewards: bool = True

    def __post_init__(self):
        checks = [
            (self.learning_rate > 0, "learningRate doit être > 0"),
            (self.clip_epsilon > 0, "clipEpsilon doit être > 0"),
            (self.buffer_capacity >= 1, "bufferCapacity doit être >= 1"),
            (self.epochs_per_update >= 1, "epochsPerUpdate doit être >= 1"),
            (0 <= self.baseline_decay < 1, "baselineDecay doit être dans [0, 1)"),
            (self.pull_rate > 0, "pullRate doit être > 0"),
            (self.no_reward_window >= 1, "noRewardWindow doit être >= 1"),
            (self.min_stddev > 0, "minStddev doit être > 0"),
            (self.max_grad_norm > 0, "maxGradNorm doit être > 0"),
        ]
        for ok, message in checks:
            if not ok:
                raise ValueError(message)


@dataclass
class BanditState:
    """État complet et mutable d'un bandit (sérialisable pour le mode control)."""

    config: BanditConfig
    params: GaussianPolicyParams
    buffer: ReplayBuffer
    baseline: RewardBaseline
    optimizer: OptimizerState
    zero_reward_count: int = 0
    pulling: bool = False
    updates: int = 0

    @classmethod
    def initial(cls, config: BanditConfig) -> "BanditState":
        return cls(
            config=config,
            params=config.initial_params,
            buffer=ReplayBuffer(config.buffer_capacity),
            baseline=RewardBaseline(decay=config.baseline_decay),
            optimizer=OptimizerState(kind=config.optimizer),
        )


# --- Opérations élémentaires -------------------------------------------------


def fixed_deterministic_bid(price: Price) -> Price:
    """Agent déterministe : toujours le même prix."""
    return price


def fixed_stochastic_bid(
    mean: float,
    stddev: float,
    bounds: PriceBounds,
    rng: np.random.Generator,
    log_space: bool = False,
) -> Price:
    """Agent stochastique : tirage gaussien borné, distribution figée."""
    return to_price(float(rng.normal(mean, stddev)), bounds, log_space)


def policy_gradient(params: GaussianPolicyParams, raw_actions: np.ndarray, advantages: np.ndarray) -> np.ndarray:
    """Gradient REINFORCE moyen : mean(A * grad log pi)."""
    d_mean, d_scale = log_prob_grad(params, raw_actions)
    return np.array([np.mean(advantages * d_mean), np.mean(advantages * d_scale)])


def clipped_surrogate(
    params: GaussianPolicyParams,
    raw_actions: np.ndarray,
    behavior_log_probs: np.ndarray,
    advantages: np.ndarray,
    clip_epsilon: float,
) -> float:
    """Objectif PPO moyen : mean(min(rho * A, clip(rho, 1 - eps, 1 + eps) * A))."""
    ratio = np.exp(log_prob(params, raw_actions) - behavior_log_probs)
    clipped = np.clip(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon)
    return float(np.mean(np.minimum(ratio * advantages, clipped * advantages)))


def clipped_surrogate_grad(
    params: GaussianPolicyParams,
    raw_actions: np.ndarray,
    behavior_log_probs: np.ndarray,
    advantages: np.ndarray,
    clip_epsilon: float,
) -> np.ndarray:
    """
    Gradient de clipped_surrogate. Un échantillon ne contribue que si le terme
    non borné est celui retenu par le min ; sinon le terme borné est constant.
    """
    ratio = np.exp(log_prob(params, raw_actions) - behavior_log_probs)
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon) * advantages
    active = unclipped <= clipped
    weight = np.where(active, advantages * ratio, 0.0)
    d_mean, d_scale = log_prob_grad(params, raw_actions)
    return np.array([np.mean(weight * d_mean), np.mean(weight * d_scale)])


def clip_grad_norm(grad: np.ndarray, max_norm: float) -> np.ndarray:
    """Ramène le gradient à une norme euclidienne au plus max_norm."""
    norm = float(np.linalg.norm(grad))
    if norm > max_norm:
        return grad * (max_norm / norm)
    return grad


def _apply_step(state: BanditState, grad: np.ndarray, label: str) -> GaussianPolicyParams:
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradientError(label, f"(gradient={grad.tolist()})")
    # gradient nul : aucun pas, les moments d'adam restent figés
    if not np.any(grad):
        return state.params
    grad = clip_grad_norm(grad, state.config.max_grad_norm)
    delta = state.optimizer.ascent_step(grad, state.config.learning_rate)
    values = state.params.as_array() + delta
    values[1] = max(values[1], math.log(state.config.min_stddev))
    if not np.all(np.isfinite(values)) or values[1] >= MAX_SCALE_PARAM:
        raise NonFiniteGradientError(label, f"(paramètres={values.tolist()})")
    return GaussianPolicyParams.from_array(values)


def bandit_observe(state: BanditState, price: Price, raw_action: float, reward: Reward, step: int) -> BanditState:
    """
    Enregistre une expérience (log-probabilité de comportement calculée avec
    les paramètres courants), met à jour la ligne de base et le compteur de
    récompenses nulles. Les récompenses nulles sont aussi stockées.
    """
    state.buffer.append(
        Experience(
            raw_action=raw_action,
            price=price,
            reward=reward,
            behavior_log_prob=log_prob(state.params, raw_action),
            step=step,
        )
    )
    state.baseline.observe(reward)
    if reward == 0:
        state.zero_reward_count += 1
    else:
        state.zero_reward_count = 0
    return state


def update_due(state: BanditState) -> bool:
    """Condition de déclenchement de la mise à jour selon la règle."""
    if state.config.update_rule is UpdateRule.PPO_CLEAR:
        return state.buffer.is_full()
    return len(state.buffer) > 0


def pull_due(state: BanditState) -> bool:
    """Condition d'activation du rappel vers la distribution initiale."""
    if state.config.pull_trigger is PullTrigger.EMPTY_BUFFER:
        return not state.buffer.has_reward()
    return state.zero_reward_count >= state.config.no_reward_window


def advantages(state: BanditState) -> np.ndarray:
    """
    Avantage de chaque entrée du buffer : récompense - ligne de base, divisé
    par la plus grande récompense observée si scale_rewards est actif.
    """
    _, rewards, _ = state.buffer.arrays()
    values = rewards - state.baseline.ema_value
    if state.config.scale_rewards and state.baseline.scale > 0:
        values = values / state.baseline.scale
    return values


def bandit_update(state: BanditState, label: str = "bandit") -> GaussianPolicyParams:
    """Met à jour la politique à partir du buffer selon la règle configurée."""
    config = state.config
    raw, _, behavior = state.buffer.arrays()
    gains = advantages(state)

    if config.update_rule is UpdateRule.VANILLA_PG:
        grad = policy_gradient(state.params, raw, gains)
        state.params = _apply_step(state, grad, label)
        state.buffer.clear()
    else:
        for _ in range(config.epochs_per_update):
            grad = clipped_surrogate_grad(state.params, raw, behavior, gains, config.clip_epsilon)
            state.params = _apply_step(state, grad, label)
        if config.update_rule is UpdateRule.PPO_CLEAR:
            state.buffer.clear()

    state.updates += 1
    return state.params


def pull_toward_initial(state: BanditState) -> GaussianPolicyParams:
    """theta <- theta + pull_rate * (theta_initial - theta), composante par composante."""
    rate = state.config.pull_rate
    initial = state.config.initial_params
    current = state.params
    scale_param = current.scale_param + rate * (initial.scale_param - current.scale_param)
    state.params = GaussianPolicyParams(
        mean=current.mean + rate * (initial.mean - current.mean),
        scale_param=max(scale_param, math.log(state.config.min_stddev)),
    )
    return state.params


def bandit_learn(state: BanditState, price: Price, raw_action: float, reward: Reward, step: int, label: str = "bandit") -> BanditState:
    """
    Un pas d'apprentissage complet : observation, puis rappel si la demande a
    disparu, sinon mise à jour si son déclencheur est satisfait.
    """
    bandit_observe(state, price, raw_action, reward, step)
    pulling = pull_due(state)
    if pulling != state.pulling:
        logger.debug("%s: rappel vers la politique initiale %s au pas %d", label, "activé" if pulling else "désactivé", step)
        state.pulling = pulling

    if pulling:
        pull_toward_initial(state)
        if state.config.update_rule is not UpdateRule.PPO_ROLLING:
            state.buffer.clear()
    elif update_due(state):
        bandit_update(state, label)
    return state


# --- Sérialisation de l'état (mode control) ----------------------------------


def bandit_state_to_dict(state: BanditState) -> Dict[str, Any]:
    return {
        "params": {"mean": state.params.mean, "scaleParam": state.params.scale_param},
        "buffer": [
            {
                "rawAction": e.raw_action,
                "price": e.price,
                "reward": e.reward,
                "behaviorLogProb": e.behavior_log_prob,
                "step": e.step,
            }
            for e in state.buffer
        ],
        "baseline": {
            "emaValue": state.baseline.ema_value,
            "count": state.baseline.count,
            "scale": state.baseline.scale,
        },
        "optimizer": {
            "m": state.optimizer.m.tolist(),
            "v": state.optimizer.v.tolist(),
            "t": state.optimizer.t,
        },
        "zeroRewardCount": state.zero_reward_count,
        "pulling": state.pulling,
        "updates": state.updates,
    }


def bandit_state_from_dict(config: BanditConfig, data: Dict[str, Any]) -> BanditState:
    entries = [
        Experience(
            raw_action=float(e["rawAction"]),
            price=float(e["price"]),
            reward=float(e["reward"]),
            behavior_log_prob=float(e["behaviorLogProb"]),
            step=int(e["step"]),
        )
        for e in data["buffer"]
    ]
    optimizer = data["optimizer"]
    return BanditState(
        config=config,
        params=GaussianPolicyParams(mean=float(data["params"]["mean"]), scale_param=float(data["params"]["scaleParam"])),
        buffer=ReplayBuffer(config.buffer_capacity, entries),
        baseline=RewardBaseline(
            decay=config.baseline_decay,
            ema_value=float(data["baseline"]["emaValue"]),
            count=int(data["baseline"]["count"]),
            scale=float(data["baseline"]["scale"]),
        ),
        optimizer=OptimizerState(
            kind=config.optimizer,
            m=np.array(optimizer["m"], dtype=float),
            v=np.array(optimizer["v"], dtype=float),
            t=int(optimizer["t"]),
        ),
        zero_reward_count=int(data["zeroRewardCount"]),
        pulling=bool(data["pulling"]),
        updates=int(data["updates"]),
    )


# --- Agents pilotés par la simulation ----------------------------------------


class Agent:
    """Interface commune : une enchère par pas, puis un retour de récompense."""

    kind = "agent"
    learns = False

    def __init__(self, agent_id: AgentId):
        self.agent_id = agent_id

    @property
    def label(self) -> str:
        return self.agent_id.label

    def bid(self, step: int) -> Tuple[Price, float]:
        """Retourne (prix, action brute)."""
        raise NotImplementedError

    def learn(self, price: Price, raw_action: float, reward: Reward, step: int) -> None:
        return None

    def policy_snapshot(self, step: int) -> Optional[PolicySnapshot]:
        return None


class FixedDeterministicAgent(Agent):
    kind = "deterministic"

    def __init__(self, agent_id: AgentId, price: Price):
        super().__init__(agent_id)
        self.price = price

    def bid(self, step: int) -> Tuple[Price, float]:
        price = fixed_deterministic_bid(self.price)
        return price, price


class FixedStochasticAgent(Agent):
    kind = "stochastic"

    def __init__(
        self,
        agent_id: AgentId,
        mean: float,
        stddev: float,
        bounds: PriceBounds,
        rng: np.random.Generator,
        log_space: bool = False,
    ):
        super().__init__(agent_id)
        if stddev <= 0:
            raise ValueError("stddev doit être > 0")
        self.mean = mean
        self.stddev = stddev
        self.bounds = bounds
        self.rng = rng
        self.log_space = log_space

    def bid(self, step: int) -> Tuple[Price, float]:
        price = fixed_stochastic_bid(self.mean, self.stddev, self.bounds, self.rng, self.log_space)
        return price, price


class GaussianBandit(Agent):
    kind = "bandit"
    learns = True

    def __init__(self, agent_id: AgentId, config: BanditConfig, rng: np.random.Generator, state: Optional[BanditState] = None):
        super().__init__(agent_id)
        self.config = config
        self.rng = rng
        self.state = state or BanditState.initial(config)

    @property
    def params(self) -> GaussianPolicyParams:
        return self.state.params

    def bid(self, step: int) -> Tuple[Price, float]:
        return sample_action(self.state.params, self.config.bounds, self.rng, self.config.log_space)

    def learn(self, price: Price, raw_action: float, reward: Reward, step: int) -> None:
        bandit_learn(self.state, price, raw_action, reward, step, self.label)

    def policy_snapshot(self, step: int) -> Optional[PolicySnapshot]:
        return snapshot(self.state.params, step, self.config.log_space)

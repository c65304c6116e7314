"""
Politique gaussienne 1-D sur le prix.

L'écart-type est paramétré par exp(scale_param) : une montée de gradient ne
peut jamais le rendre négatif ou nul. Les log-probabilités sont toujours
évaluées sur l'action brute (avant bornage) ; le bornage est un effet de
l'environnement.
"""

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .market import Price, PriceBounds

ArrayLike = Union[float, np.ndarray]

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianPolicyParams:
    """Paramètres entraînables : moyenne et paramètre d'échelle non contraint."""

    mean: float
    scale_param: float

    @property
    def stddev(self) -> float:
        return math.exp(self.scale_param)

    @classmethod
    def from_stddev(cls, mean: float, stddev: float) -> "GaussianPolicyParams":
        return cls(mean=float(mean), scale_param=math.log(stddev))

    def as_array(self) -> np.ndarray:
        return np.array([self.mean, self.scale_param], dtype=float)

    @classmethod
    def from_array(cls, values: np.ndarray) -> "GaussianPolicyParams":
        return cls(mean=float(values[0]), scale_param=float(values[1]))


@dataclass(frozen=True)
class PolicySnapshot:
    """
    Instantané de la politique d'un bandit à un pas donné. mean et stddev sont
    ceux de l'action brute ; en mode log ils vivent dans l'espace log-prix.
    """

    mean: float
    stddev: float
    step: int
    log_space: bool = False

    @property
    def central_price(self) -> float:
        """Prix central de la politique : mean, ou exp(mean) (médiane) en mode log."""
        return math.exp(self.mean) if self.log_space else self.mean


def snapshot(params: GaussianPolicyParams, step: int, log_space: bool = False) -> PolicySnapshot:
    return PolicySnapshot(mean=params.mean, stddev=params.stddev, step=step, log_space=log_space)


def to_price(raw_action: float, bounds: PriceBounds, log_space: bool = False) -> Price:
    """Transforme l'action brute en prix (exp en mode log) puis la borne."""
    value = math.exp(raw_action) if log_space else raw_action
    return bounds.clamp(value)


def sample_action(
    params: GaussianPolicyParams,
    bounds: PriceBounds,
    rng: np.random.Generator,
    log_space: bool = False,
) -> Tuple[Price, float]:
    """
    Tire une action brute ~ N(mean, stddev) et retourne (prix borné, action brute).
    """
    raw_action = float(rng.normal(params.mean, params.stddev))
    return to_price(raw_action, bounds, log_space), raw_action


def log_prob(params: GaussianPolicyParams, raw_action: ArrayLike) -> ArrayLike:
    """Log-densité gaussienne de l'action brute."""
    z = (np.asarray(raw_action, dtype=float) - params.mean) / params.stddev
    result = -0.5 * z * z - params.scale_param - HALF_LOG_2PI
    return float(result) if np.ndim(result) == 0 else result


def log_prob_grad(params: GaussianPolicyParams, raw_action: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    """
    Gradient analytique de log_prob par rapport à (mean, scale_param) :
    d_mean = (a - mean) / stddev**2 ; d_scale = (a - mean)**2 / stddev**2 - 1.
    """
    diff = np.asarray(raw_action, dtype=float) - params.mean
    variance = params.stddev ** 2
    d_mean = diff / variance
    d_scale = diff * diff / variance - 1.0
    if np.ndim(d_mean) == 0:
        return float(d_mean), float(d_scale)
    return d_mean, d_scale


def param_distance(a: GaussianPolicyParams, b: GaussianPolicyParams) -> float:
    """Distance euclidienne dans l'espace (mean, scale_param)."""
    return math.hypot(a.mean - b.mean, a.scale_param - b.scale_param)


def density(params: GaussianPolicyParams, prices: np.ndarray, log_space: bool = False) -> np.ndarray:
    """
    Densité de la politique évaluée sur une grille de prix. En mode log, la
    densité du prix est celle d'une loi log-normale (nulle pour p <= 0).
    """
    prices = np.asarray(prices, dtype=float)
    if not log_space:
        return np.exp(log_prob(params, prices))
    result = np.zeros_like(prices)
    positive = prices > 0
    result[positive] = np.exp(log_prob(params, np.log(prices[positive]))) / prices[positive]
    return result

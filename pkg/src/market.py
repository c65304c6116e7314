"""
Types de base du marché et calcul des récompenses.

Les prix et budgets sont exprimés en unités de budget par requête, les volumes
en requêtes par pas (réels : le trafic est agrégé en volume normalisé).
Les récompenses sont des flux par pas ; le cumul est tenu par la simulation.
"""

from dataclasses import dataclass

from .errors import ScenarioError

# Alias de types (valeurs réelles positives ou nulles)
Price = float
Budget = float
QueryVolume = float
Reward = float


@dataclass(frozen=True)
class PriceBounds:
    """Intervalle de prix autorisé [floor, ceiling]."""

    floor: float
    ceiling: float

    def __post_init__(self):
        if self.floor < 0:
            raise ScenarioError("le prix plancher doit être positif ou nul", path="priceBounds.floor")
        if not self.ceiling > self.floor:
            raise ScenarioError(
                "le prix plafond doit être strictement supérieur au plancher",
                path="priceBounds.ceiling",
            )

    def clamp(self, price: float) -> float:
        return min(max(price, self.floor), self.ceiling)

    def contains(self, price: float) -> bool:
        return self.floor <= price <= self.ceiling

    @property
    def width(self) -> float:
        return self.ceiling - self.floor


def single_agent_reward(price: Price, budget: Budget, volume: QueryVolume) -> Reward:
    """
    Récompense d'un agent seul : tout le volume est servi si price <= budget
    (le prix égal au budget est accepté), rien sinon.
    """
    if price <= budget:
        return price * volume
    return 0.0


def agent_revenue(price: Price, served_volume: QueryVolume) -> Reward:
    """Revenu d'un agent : prix proposé multiplié par le volume effectivement servi."""
    return price * served_volume

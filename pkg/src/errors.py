"""
Exceptions du simulateur.

Les exceptions portant des attributs définissent __reduce__ : elles doivent
traverser les processus du balayage parallèle (pickle) sans perdre leurs champs.
"""

from typing import Optional


class SimulatorError(Exception):
    """Erreur de base du simulateur."""


class ScenarioError(SimulatorError, ValueError):
    """
    Scénario invalide. `path` désigne la clé fautive (ex. agents[0].stddev),
    `rule` la règle sémantique violée.
    """

    def __init__(self, message: str, path: Optional[str] = None, rule: Optional[str] = None):
        self.message = message
        self.path = path
        self.rule = rule
        prefix = path or rule
        super().__init__(f"{prefix}: {message}" if prefix else message)

    def __reduce__(self):
        return type(self), (self.message, self.path, self.rule)


class NonFiniteGradientError(SimulatorError, FloatingPointError):
    """Gradient non fini (taux d'apprentissage mal réglé)."""

    def __init__(self, label: str, detail: str = ""):
        self.label = label
        self.detail = detail
        super().__init__(f"gradient non fini pour l'agent '{label}' {detail}".strip())

    def __reduce__(self):
        return type(self), (self.label, self.detail)


class SimulationFault(SimulatorError):
    """Erreur d'exécution pendant la simulation, avec le pas fautif."""

    def __init__(self, step: int, cause: Exception):
        self.step = step
        self.cause = cause
        super().__init__(f"pas {step}: {cause}")

    def __reduce__(self):
        return type(self), (self.step, self.cause)


class StateFileError(SimulatorError):
    """Fichier d'état du contrôleur corrompu ou de version inconnue."""

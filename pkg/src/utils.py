"""
Fonctions utilitaires : flux aléatoires, formatage des nombres.
"""

from typing import Any, Dict

import numpy as np

from .config import FLOAT_FORMAT

# Clé de dérivation du flux du générateur de trafic ; l'agent i utilise i + 1
TRAFFIC_STREAM_KEY = 0


def derive_rng(seed: int, stream_key: int) -> np.random.Generator:
    """
    Flux aléatoire indépendant dérivé de la graine maître.
    Le flux k ne dépend que de (seed, k) : ajouter un agent ne perturbe
    ni le trafic ni les agents déjà déclarés.
    """
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream_key),))
    return np.random.Generator(np.random.PCG64(sequence))


def traffic_rng(seed: int) -> np.random.Generator:
    return derive_rng(seed, TRAFFIC_STREAM_KEY)


def agent_rng(seed: int, agent_index: int) -> np.random.Generator:
    return derive_rng(seed, agent_index + 1)


def rng_state(rng: np.random.Generator) -> Dict[str, Any]:
    """État sérialisable (JSON) du générateur."""
    return rng.bit_generator.state


def rng_from_state(state: Dict[str, Any]) -> np.random.Generator:
    bit_generator = np.random.PCG64()
    bit_generator.state = state
    return np.random.Generator(bit_generator)


def format_float(value: float) -> str:
    """Flottant sur 9 chiffres significatifs (sorties CSV et données de tracé)."""
    return FLOAT_FORMAT % value

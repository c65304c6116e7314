"""
Configuration, chemins et valeurs par défaut du simulateur.
"""

import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Union

# Chemin de base du projet (dossier parent de src/)
BASE_DIR = Path(__file__).resolve().parent.parent

# Dossiers
SCENARIOS_DIR = BASE_DIR / "scenarios"
TEMPLATES_DIR = BASE_DIR / "templates"
OUTPUT_DIR = BASE_DIR / "output"
SETTINGS_FILE = BASE_DIR / "settings.json"

# Version des formats JSON (scénarios, fichier d'état du contrôleur)
SCHEMA_VERSION = 1

# Valeurs par défaut de la simulation
DEFAULT_STEPS = 1000
DEFAULT_SNAPSHOT_EVERY = 1
DEFAULT_CONVERGENCE_BAND = 0.1
DEFAULT_WINDOW_SECONDS = 180.0
DENSITY_GRID_POINTS = 256

# Format des flottants dans les sorties texte (9 chiffres significatifs)
FLOAT_FORMAT = "%.9g"

# Hyperparamètres par défaut des bandits
BANDIT_DEFAULTS: Dict[str, Any] = {
    "updateRule": "ppoRolling",
    "learningRate": 1e-2,
    "clipEpsilon": 0.2,
    "bufferCapacity": 16,
    "epochsPerUpdate": 4,
    "baselineDecay": 0.99,
    "pullRate": 0.02,
    "noRewardWindow": 10,
    "pullTrigger": "zeroRewardWindow",
    "optimizer": "sgd",
    "minStddev": 1e-3,
    "logSpace": False,
    "maxGradNorm": 1.0,
    "scaleRewards": True,
}

LOG_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)s | %(message)s"
LOG_DATEFMT = "%Y-%m-%d %H:%M:%S"


@dataclass
class Settings:
    """Préférences utilisateur (fichier settings.json optionnel)."""

    output_dir: str = str(OUTPUT_DIR)
    log_level: str = "INFO"
    sweep_workers: int = 1
    log_file: Optional[str] = None

    @classmethod
    def load(cls, path: Optional[Path] = None) -> "Settings":
        """Charge les préférences ; valeurs par défaut si le fichier est absent ou illisible."""
        path = Path(path) if path else SETTINGS_FILE
        if path.exists():
            try:
                with open(path, "r", encoding="utf-8") as f:
                    data = json.load(f)
                known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
                return cls(**known)
            except (OSError, ValueError, TypeError):
                logging.getLogger(__name__).warning(
                    "Fichier de préférences illisible (%s), valeurs par défaut utilisées", path
                )
        return cls()


def setup_logging(level: int = logging.INFO, log_file: Optional[Union[str, Path]] = None) -> None:
    """
    Configure le logger racine. Les logs vont toujours sur stderr :
    stdout est réservé au résumé et au protocole du mode control.
    """
    handlers: list = [logging.StreamHandler(sys.stderr)]
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(
        level=level,
        format=LOG_FORMAT,
        datefmt=LOG_DATEFMT,
        handlers=handlers,
        force=True,
    )


def ensure_directories() -> None:
    """
    Crée les dossiers nécessaires s'ils n'existent pas.
    """
    for directory in [SCENARIOS_DIR, TEMPLATES_DIR, OUTPUT_DIR]:
        directory.mkdir(parents=True, exist_ok=True)

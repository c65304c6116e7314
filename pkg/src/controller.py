"""
Mode control : pilotage en continu du prix d'un Indexer par un bandit.

Protocole NDJSON (UTF-8, une ligne par message) :
- entrée  {"type": "volume", "servedQueries": q, "windowSeconds": s}
- sortie  {"type": "price", "value": p, "mean": m, "stddev": sd, "step": k}

Les rapports de volume sont agrégés par fenêtre (180 s par défaut). Un
rapport qui déborde de la fenêtre courante est réparti au prorata des
secondes : il peut clore plusieurs fenêtres et le reste ouvre la suivante.
À la clôture d'une fenêtre, la récompense vaut dernier prix émis × requêtes
servies ; le bandit apprend, tire le prix suivant et l'état complet est
persisté de façon atomique (fichier temporaire puis renommage). Un
redémarrage sur le même état reprend exactement au même point.
"""

import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, TextIO, Union

import numpy as np

from .agents import BanditConfig, BanditState, bandit_learn, bandit_state_from_dict, bandit_state_to_dict
from .config import DEFAULT_WINDOW_SECONDS, SCHEMA_VERSION
from .errors import ScenarioError, StateFileError
from .policy import sample_action
from .scenario_io import parse_controller_config, serialize_bandit
from .utils import agent_rng, rng_from_state, rng_state

logger = logging.getLogger(__name__)


@dataclass
class PendingPrice:
    """Dernier prix émis, en attente de la récompense de sa fenêtre."""

    price: float
    raw_action: float
    mean: float
    stddev: float


def write_state_atomic(path: Union[str, Path], payload: Dict[str, Any]) -> None:
    """
    Écrit le fichier d'état via un fichier temporaire du même dossier, fsync
    puis os.replace : le fichier sur disque est toujours un état complet.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=str(path.parent))
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            json.dump(payload, f, separators=(",", ":"))
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


class PriceController:
    """Bandit unique piloté par des rapports de volume agrégés par fenêtre."""

    def __init__(
        self,
        label: str,
        config: BanditConfig,
        seed: int,
        state_path: Union[str, Path],
        window_seconds: float = DEFAULT_WINDOW_SECONDS,
        bandit: Optional[BanditState] = None,
        rng: Optional[np.random.Generator] = None,
    ):
        if not window_seconds > 0:
            raise ValueError("window_seconds doit être > 0")
        self.label = label
        self.config = config
        self.seed = seed
        self.state_path = Path(state_path)
        self.window_seconds = window_seconds
        self.bandit = bandit or BanditState.initial(config)
        self.rng = rng or agent_rng(seed, 0)
        self.step = 0
        self.pending: Optional[PendingPrice] = None
        self.window_served = 0.0
        self.window_elapsed = 0.0

    # --- persistance ---------------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        bounds = self.config.bounds
        return {
            "schemaVersion": SCHEMA_VERSION,
            "seed": self.seed,
            "priceBounds": {"floor": bounds.floor, "ceiling": bounds.ceiling},
            "agent": serialize_bandit(self.label, self.config),
            "bandit": bandit_state_to_dict(self.bandit),
            "rng": rng_state(self.rng),
            "step": self.step,
            "pending": None if self.pending is None else {
                "price": self.pending.price,
                "rawAction": self.pending.raw_action,
                "mean": self.pending.mean,
                "stddev": self.pending.stddev,
            },
            "window": {"servedQueries": self.window_served, "elapsedSeconds": self.window_elapsed},
        }

    def save(self) -> None:
        write_state_atomic(self.state_path, self.to_dict())

    @classmethod
    def load(cls, state_path: Union[str, Path], window_seconds: float = DEFAULT_WINDOW_SECONDS) -> "PriceController":
        """Reprend depuis un fichier d'état ; refuse de démarrer s'il est corrompu."""
        state_path = Path(state_path)
        try:
            with open(state_path, "r", encoding="utf-8") as f:
                data = json.load(f)
            if data.get("schemaVersion") != SCHEMA_VERSION:
                raise StateFileError(f"version d'état non supportée : {data.get('schemaVersion')!r}")
            label, config, seed = parse_controller_config(
                {"schemaVersion": SCHEMA_VERSION, "seed": data["seed"],
                 "priceBounds": data["priceBounds"], "agent": data["agent"]}
            )
            controller = cls(
                label, config, seed, state_path, window_seconds,
                bandit=bandit_state_from_dict(config, data["bandit"]),
                rng=rng_from_state(data["rng"]),
            )
            controller.step = int(data["step"])
            pending = data["pending"]
            if pending is not None:
                controller.pending = PendingPrice(
                    float(pending["price"]), float(pending["rawAction"]),
                    float(pending["mean"]), float(pending["stddev"]),
                )
            controller.window_served = float(data["window"]["servedQueries"])
            controller.window_elapsed = float(data["window"]["elapsedSeconds"])
        except StateFileError:
            raise
        except (OSError, ValueError, KeyError, TypeError, AttributeError, ScenarioError) as exc:
            raise StateFileError(f"fichier d'état illisible '{state_path}' : {exc}") from exc
        logger.info("Reprise de l'état %s au pas %d", state_path, controller.step)
        return controller

    # --- boucle de contrôle --------------------------------------------------

    def _emit(self) -> Dict[str, Any]:
        params = self.bandit.params
        price, raw_action = sample_action(params, self.config.bounds, self.rng, self.config.log_space)
        self.pending = PendingPrice(price, raw_action, params.mean, params.stddev)
        return self.price_message()

    def price_message(self) -> Dict[str, Any]:
        return {
            "type": "price",
            "value": self.pending.price,
            "mean": self.pending.mean,
            "stddev": self.pending.stddev,
            "step": self.step,
        }

    def start(self) -> Optional[Dict[str, Any]]:
        """Premier prix d'un démarrage à froid ; rien à émettre lors d'une reprise."""
        if self.pending is not None:
            return None
        message = self._emit()
        self.save()
        return message

    @staticmethod
    def parse_volume(line: str) -> Optional[Dict[str, float]]:
        try:
            message = json.loads(line)
        except json.JSONDecodeError:
            return None
        if not isinstance(message, dict) or message.get("type") != "volume":
            return None
        served = message.get("servedQueries")
        seconds = message.get("windowSeconds")
        for value in (served, seconds):
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                return None
        if served < 0 or seconds <= 0:
            return None
        return {"servedQueries": float(served), "windowSeconds": float(seconds)}

    def _close_window(self) -> Dict[str, Any]:
        pending = self.pending
        reward = pending.price * self.window_served
        bandit_learn(self.bandit, pending.price, pending.raw_action, reward, self.step, self.label)
        self.step += 1
        self.window_served = 0.0
        self.window_elapsed = 0.0
        return self._emit()

    def handle_line(self, line: str) -> List[Dict[str, Any]]:
        """
        Traite un rapport de volume et retourne les messages de prix des
        fenêtres closes (aucun, un ou plusieurs). Les lignes malformées sont
        ignorées.
        """
        if not line.strip():
            return []
        report = self.parse_volume(line)
        if report is None:
            logger.warning("Ligne ignorée (message de volume invalide) : %s", line.strip()[:200])
            return []
        if self.pending is None:
            self.start()

        served = report["servedQueries"]
        seconds = report["windowSeconds"]
        messages = []
        while self.window_elapsed + seconds >= self.window_seconds:
            room = self.window_seconds - self.window_elapsed
            part = served if room >= seconds else served * room / seconds
            self.window_served += part
            served -= part
            seconds -= room
            messages.append(self._close_window())
        self.window_served += served
        self.window_elapsed += seconds
        if len(messages) > 1:
            logger.debug("Rapport de %.0f s : %d fenêtres closes", report["windowSeconds"], len(messages))
        self.save()
        return messages

    def run(self, input_stream: Iterable[str], output_stream: TextIO) -> int:
        """Boucle principale ; retourne le nombre de prix émis."""
        emitted = 0
        first = self.start()
        if first is not None:
            _write_message(output_stream, first)
            emitted += 1
        for line in input_stream:
            for message in self.handle_line(line):
                _write_message(output_stream, message)
                emitted += 1
        return emitted


def _write_message(stream: TextIO, message: Dict[str, Any]) -> None:
    stream.write(json.dumps(message, separators=(",", ":")) + "\n")
    stream.flush()


def open_controller(
    agent_config_path: Optional[Union[str, Path]],
    state_path: Union[str, Path],
    window_seconds: float = DEFAULT_WINDOW_SECONDS,
) -> PriceController:
    """Reprend l'état s'il existe, sinon démarre à froid depuis la configuration de l'agent."""
    state_path = Path(state_path)
    if state_path.exists():
        return PriceController.load(state_path, window_seconds)
    if agent_config_path is None:
        raise FileNotFoundError("aucun état existant et aucune configuration d'agent fournie")
    with open(agent_config_path, "r", encoding="utf-8") as f:
        label, config, seed = parse_controller_config(f.read())
    logger.info("Démarrage à froid du contrôleur '%s' (état : %s)", label, state_path)
    return PriceController(label, config, seed, state_path, window_seconds)

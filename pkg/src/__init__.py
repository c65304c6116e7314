# Package src - Simulateur de marché et tarification par bandits gaussiens
"""
Ce package contient les modules du simulateur de marché multi-agents
(Indexers, Consumers, Gateway) et des bandits gaussiens de tarification.

Modules:
- config: Configuration, chemins et valeurs par défaut
- errors: Exceptions du simulateur
- utils: Fonctions utilitaires (bornage, flux aléatoires, formatage)
- market: Prix, budgets et récompense
- policy: Politique gaussienne (échantillonnage, log-densité, gradient)
- agents: Agents fixes et bandits (PG, PPO, PPO à tampon glissant)
- environment: Génération du trafic et répartition des requêtes
- simulation: Boucle de simulation et résumés
- scenario_io: Lecture et écriture des scénarios JSON
- csv_handler: Métriques CSV / NDJSON et agrégats de balayage
- plot_data: Données de tracé et recettes gnuplot
- controller: Mode control (prix piloté par rapports de volume)
- commands: Commandes simulate, sweep et control
"""

__version__ = "1.0.0"

from .config import *
from .errors import NonFiniteGradientError, ScenarioError, SimulationFault, SimulatorError, StateFileError
from .market import PriceBounds, agent_revenue, single_agent_reward
from .policy import GaussianPolicyParams, PolicySnapshot, density, log_prob, log_prob_grad, param_distance, sample_action
from .agents import BanditConfig, BanditState, GaussianBandit, ReplayBuffer, UpdateRule, bandit_observe, bandit_update
from .environment import DistributorKind, DistributorSpec, Schedule, TrafficConfig, distribute, generate_traffic
from .simulation import ScenarioConfig, StepRecord, run_scenario, summarize
from .scenario_io import load_scenario, parse_scenario, serialize_scenario
from .csv_handler import load_metrics, load_records, write_metrics
from .plot_data import emit_plot_data

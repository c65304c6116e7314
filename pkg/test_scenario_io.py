#!/usr/bin/env python3
"""
Tests de lecture/écriture des scénarios, des métriques et des données de tracé.
"""

import sys
import os
import json
import math

import pytest

# Ajouter le chemin pour importer
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.agents import UpdateRule
from src.config import SCENARIOS_DIR
from src.csv_handler import load_metrics, load_records, write_metrics
from src.environment import DistributorKind
from src.errors import ScenarioError
from src.market import PriceBounds
from src.plot_data import PlotRequest, emit_plot_data
from src.policy import PolicySnapshot
from src.scenario_io import load_scenario, parse_controller_config, parse_scenario, serialize_scenario
from src.simulation import AgentStep, BanditSpec, DeterministicSpec, StepRecord, run_scenario

MINIMAL = {
    "priceBounds": {"floor": 0.0, "ceiling": 2.0},
    "traffic": {"baseVolume": 100, "budgetSchedule": [{"fromStep": 0, "budget": 1.0}]},
    "distributor": {"kind": "singleAgentThreshold"},
    "agents": [{"kind": "deterministic", "label": "fixed", "price": 0.5}],
}


def document(**changes):
    doc = json.loads(json.dumps(MINIMAL))
    doc.update(changes)
    return doc


def read_dat(path):
    rows = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line and not line.startswith("#"):
            rows.append([float(v) for v in line.split()])
    return rows


# --- Scénarios -----------------------------------------------------------------


def test_minimal_document_gets_defaults():
    config = parse_scenario(MINIMAL)
    assert config.steps == 1000
    assert config.seed == 0
    assert config.traffic.noise_stddev == 0.0
    assert config.traffic.volume_schedule.value_at(500) == 1.0
    assert config.agents == (DeterministicSpec("fixed", 0.5),)
    assert any(note.startswith("steps") for note in config.provenance)


def test_bandit_defaults_applied():
    agents = [{"kind": "bandit", "label": "ppo", "initialMean": 0.5, "initialStddev": 0.2}]
    spec = parse_scenario(document(agents=agents)).agents[0]
    assert isinstance(spec, BanditSpec)
    assert spec.config.update_rule is UpdateRule.PPO_ROLLING
    assert spec.config.learning_rate == 1e-2
    assert spec.config.buffer_capacity == 16
    assert spec.config.initial_params.stddev == pytest.approx(0.2)


@pytest.mark.parametrize(
    "changes, path",
    [
        ({"agents": [{"kind": "stochastic", "label": "s", "mean": 1.0, "stddev": -1}]}, "agents[0].stddev"),
        ({"agents": [{"kind": "deterministic", "label": "d", "price": 0.5, "colour": 1}]}, "agents[0].colour"),
        ({"agents": [{"kind": "robot", "label": "r"}]}, "agents[0].kind"),
        ({"steps": 0}, "steps"),
        ({"priceBounds": {"floor": 1.0, "ceiling": 0.5}}, "priceBounds.ceiling"),
        ({"distributor": {"kind": "softmaxNegPrice"}}, "distributor.temperature"),
        ({"traffic": {"baseVolume": 100, "budgetSchedule": [{"fromStep": 5, "budget": 1.0}]}},
         "traffic.budgetSchedule[0].fromStep"),
        ({"extra": True}, "extra"),
    ],
)
def test_invalid_documents_name_the_key(changes, path):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(document(**changes))
    assert info.value.path == path
    assert path in str(info.value)


def test_semantic_rule_violation():
    agents = [{"kind": "deterministic", "label": "a", "price": 0.5}, {"kind": "deterministic", "label": "b", "price": 0.6}]
    with pytest.raises(ScenarioError) as info:
        parse_scenario(document(agents=agents))
    assert info.value.rule == "singleAgentThreshold"


def test_invalid_json_text():
    with pytest.raises(ScenarioError):
        parse_scenario("{not json")


def test_bundled_reference_scenario():
    config = load_scenario(SCENARIOS_DIR / "fixed_budget_discovery.json")
    assert config.name == "fixed_budget_discovery"
    assert config.steps == 1000
    assert config.seed == 0
    assert config.distributor.kind is DistributorKind.SINGLE_AGENT_THRESHOLD
    assert config.traffic.base_volume == 100.0
    assert config.traffic.noise_stddev == 0.0
    assert config.traffic.budget_schedule.value_at(999) == 1.0
    (spec,) = config.agents
    assert spec.config.update_rule is UpdateRule.PPO_ROLLING


def test_bundled_scenarios_round_trip():
    for path in sorted(SCENARIOS_DIR.glob("*.json")):
        if path.name == "controller.json":
            continue
        config = load_scenario(path)
        again = parse_scenario(json.dumps(serialize_scenario(config)))
        assert again == config, path.name


def test_scenario_name_fallback_to_bundled_dir():
    assert load_scenario("dynamic_budget.json").name == "dynamic_budget"
    with pytest.raises(FileNotFoundError):
        load_scenario("does_not_exist.json")


def test_controller_config():
    label, config, seed = parse_controller_config((SCENARIOS_DIR / "controller.json").read_text(encoding="utf-8"))
    assert label == "indexer"
    assert seed == 0
    assert config.initial_params.mean == 0.5
    with pytest.raises(ScenarioError):
        parse_controller_config({"priceBounds": {"floor": 0, "ceiling": 2},
                                 "agent": {"kind": "deterministic", "label": "d", "price": 1.0}})


# --- Métriques -----------------------------------------------------------------


def test_write_metrics_rows_and_reload(tmp_path):
    config = parse_scenario(document(steps=10, agents=[
        {"kind": "bandit", "label": "bandit-0", "initialMean": 0.5, "initialStddev": 0.2}
    ]))
    records = run_scenario(config)
    paths = write_metrics(records, tmp_path / "run")

    lines = paths["csv"].read_text(encoding="utf-8").split("\n")
    assert lines[-1] == ""
    assert len(lines) - 1 == 11
    assert lines[0].startswith("step,volume,budget,dropped,bid_bandit-0,served_bandit-0")
    assert "\r" not in paths["csv"].read_bytes().decode("utf-8")

    assert load_records(paths["ndjson"]) == records
    df = load_metrics(paths["csv"])
    assert list(df["step"]) == list(range(10))
    assert df["mean_bandit-0"].iloc[-1] == pytest.approx(records[-1].policy_snapshots["bandit-0"].mean, rel=1e-8)


def test_metrics_empty_cells_for_fixed_agents(tmp_path):
    records = run_scenario(parse_scenario(document(steps=3)))
    paths = write_metrics(records, tmp_path)
    df = load_metrics(paths["csv"])
    assert df["mean_fixed"].isna().all()
    assert df["cumrev_fixed"].iloc[-1] == pytest.approx(150.0)


# --- Données de tracé ----------------------------------------------------------


def _density_records():
    return [StepRecord(0, 100.0, 1.0, {"b": AgentStep(1.0, 100.0, 100.0, 100.0)}, 0.0,
                       {"b": PolicySnapshot(1.0, 0.5, 0)})]


def test_policy_density_peak(tmp_path):
    output = emit_plot_data(_density_records(), "policyDensity@0", tmp_path, PriceBounds(0.0, 2.0))
    rows = read_dat(tmp_path / "policyDensity_0_b.dat")
    assert len(rows) == 256
    price, value = max(rows, key=lambda row: row[1])
    assert abs(price - 1.0) <= 2.0 / 255
    assert value == pytest.approx(1.0 / (0.5 * math.sqrt(2 * math.pi)), rel=1e-3)
    assert (tmp_path / "policyDensity_0.manifest") in output.files
    assert "policyDensity_0_b.dat" in (tmp_path / "policyDensity_0.gp").read_text(encoding="utf-8")


def test_policy_density_missing_snapshot(tmp_path):
    with pytest.raises(ValueError):
        emit_plot_data(_density_records(), "policyDensity@7", tmp_path, PriceBounds(0.0, 2.0))


def test_total_revenue_and_served_series(tmp_path):
    agents = [{"kind": "bandit", "label": "b0", "initialMean": 0.5, "initialStddev": 0.2},
              {"kind": "deterministic", "label": "d", "price": 0.8}]
    config = parse_scenario(document(steps=50, agents=agents, distributor={"kind": "budgetFilteredUniform"}))
    records = run_scenario(config)

    emit_plot_data(records, "totalRevenue", tmp_path, config.price_bounds)
    revenue = [row[1] for row in read_dat(tmp_path / "totalRevenue_b0.dat")]
    assert len(revenue) == 50
    assert all(b >= a for a, b in zip(revenue, revenue[1:]))

    emit_plot_data(records, "servedVolumes", tmp_path, config.price_bounds)
    manifest = (tmp_path / "servedVolumes.manifest").read_text(encoding="utf-8")
    assert "servedVolumes_dropped.dat" in manifest
    served_total = read_dat(tmp_path / "servedVolumes_d.dat")[-1][1]
    assert served_total == pytest.approx(sum(r.per_agent["d"].served for r in records), rel=1e-8)

    emit_plot_data(records, "policyTrace", tmp_path, config.price_bounds)
    assert (tmp_path / "policyTrace_b0.dat").exists()
    assert not (tmp_path / "policyTrace_d.dat").exists()


@pytest.mark.parametrize("text", ["histogram", "totalRevenue@3", "policyDensity@x"])
def test_plot_request_invalid(text):
    with pytest.raises(ValueError):
        PlotRequest.parse(text)

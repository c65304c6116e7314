#!/usr/bin/env python3
"""
Tests de l'environnement : plannings, générateur de trafic et distributeurs.
"""

import sys
import os

import numpy as np
import pytest

# Ajouter le chemin pour importer
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.agents import AgentId
from src.environment import (
    AllocationResult,
    DistributorKind,
    DistributorSpec,
    Schedule,
    TrafficConfig,
    distribute,
    generate_traffic,
    is_conserved,
)
from src.errors import ScenarioError

IDS = [AgentId(i, f"a{i}") for i in range(4)]


def bids(*prices):
    return list(zip(IDS, prices))


def served(result: AllocationResult, n: int):
    return [result.served[IDS[i]] for i in range(n)]


def test_schedule_value_at():
    schedule = Schedule(((0, 1.0), (200, 0.5)))
    assert schedule.value_at(0) == 1.0
    assert schedule.value_at(199) == 1.0
    assert schedule.value_at(200) == 0.5
    assert schedule.value_at(10_000) == 0.5


@pytest.mark.parametrize("segments", [(), ((1, 1.0),), ((0, 1.0), (0, 2.0)), ((0, 1.0), (50, 2.0), (20, 3.0))])
def test_schedule_invalid(segments):
    with pytest.raises(ScenarioError):
        Schedule(segments)


def test_noiseless_traffic():
    config = TrafficConfig(100.0, 0.0, Schedule.constant(1.0))
    rng = np.random.default_rng(0)
    assert generate_traffic(config, 0, rng) == (100.0, 1.0)
    assert generate_traffic(config, 57, rng) == (100.0, 1.0)


def test_volume_multiplier_zero():
    config = TrafficConfig(100.0, 0.0, Schedule.constant(1.0), Schedule(((0, 1.0), (200, 0.0))))
    rng = np.random.default_rng(0)
    assert generate_traffic(config, 199, rng)[0] == 100.0
    assert all(generate_traffic(config, step, rng)[0] == 0.0 for step in range(200, 400))


def test_noisy_traffic_mean():
    config = TrafficConfig(100.0, 5.0, Schedule.constant(1.0))
    rng = np.random.default_rng(1)
    volumes = [generate_traffic(config, step, rng)[0] for step in range(100_000)]
    assert min(volumes) >= 0.0
    assert float(np.mean(volumes)) == pytest.approx(100.0, abs=0.1)


def test_noise_draw_keeps_stream_aligned():
    """Un bruit nul consomme quand même un tirage."""
    rng_a, rng_b = np.random.default_rng(3), np.random.default_rng(3)
    generate_traffic(TrafficConfig(100.0, 0.0, Schedule.constant(1.0)), 0, rng_a)
    rng_b.normal(0.0, 1.0)
    assert rng_a.random() == rng_b.random()


def test_inverse_proportional_example():
    result = distribute(DistributorSpec(DistributorKind.INVERSE_PROPORTIONAL), bids(1.0, 2.0, 4.0), 70.0, 10.0)
    assert served(result, 3) == pytest.approx([40.0, 20.0, 10.0])
    assert result.dropped == 0.0


def test_inverse_proportional_zero_price_limit():
    result = distribute(DistributorSpec(DistributorKind.INVERSE_PROPORTIONAL), bids(0.0, 0.5, 0.0), 90.0, 1.0)
    assert served(result, 3) == pytest.approx([45.0, 0.0, 45.0])


def test_budget_filtered_uniform_example():
    result = distribute(DistributorSpec(DistributorKind.BUDGET_FILTERED_UNIFORM), bids(0.5, 1.5), 100.0, 1.0)
    assert served(result, 2) == [100.0, 0.0]
    assert result.dropped == 0.0


@pytest.mark.parametrize(
    "spec",
    [
        DistributorSpec(DistributorKind.BUDGET_FILTERED_UNIFORM),
        DistributorSpec(DistributorKind.INVERSE_PROPORTIONAL),
        DistributorSpec(DistributorKind.SOFTMAX_NEG_PRICE, 0.1),
    ],
)
def test_all_bids_over_budget_are_dropped(spec):
    result = distribute(spec, bids(1.5, 2.0), 100.0, 1.0)
    assert served(result, 2) == [0.0, 0.0]
    assert result.dropped == 100.0


def test_single_agent_threshold():
    spec = DistributorSpec(DistributorKind.SINGLE_AGENT_THRESHOLD)
    assert distribute(spec, bids(1.0), 100.0, 1.0).served[IDS[0]] == 100.0
    over = distribute(spec, bids(1.01), 100.0, 1.0)
    assert over.served[IDS[0]] == 0.0
    assert over.dropped == 100.0
    with pytest.raises(ScenarioError):
        distribute(spec, bids(0.5, 0.6), 100.0, 1.0)


def test_softmax_prefers_lowest_price():
    result = distribute(DistributorSpec(DistributorKind.SOFTMAX_NEG_PRICE, 0.05), bids(0.5, 0.6, 0.8), 100.0, 1.0)
    shares = served(result, 3)
    assert shares[0] > shares[1] > shares[2]
    assert shares[0] / shares[1] == pytest.approx(np.exp(0.1 / 0.05))


def test_softmax_requires_temperature():
    with pytest.raises(ScenarioError):
        DistributorSpec(DistributorKind.SOFTMAX_NEG_PRICE)


def test_conservation_and_filtering_randomized():
    rng = np.random.default_rng(2023)
    kinds = list(DistributorKind)
    for case in range(10_000):
        kind = kinds[case % len(kinds)]
        n = 1 if kind is DistributorKind.SINGLE_AGENT_THRESHOLD else int(rng.integers(1, 5))
        prices = rng.uniform(0.0, 2.0, size=n)
        if rng.random() < 0.1:
            prices[int(rng.integers(0, n))] = 0.0
        budget = float(rng.uniform(0.0, 2.0))
        volume = float(rng.uniform(0.0, 500.0))
        spec = DistributorSpec(kind, float(rng.uniform(0.01, 1.0)) if kind is DistributorKind.SOFTMAX_NEG_PRICE else None)
        result = distribute(spec, bids(*prices.tolist()), volume, budget)
        assert is_conserved(result, volume)
        for agent_id, price in zip(IDS, prices):
            assert result.served[agent_id] >= 0.0
            if result.served[agent_id] > 0:
                assert price <= budget


def test_inverse_proportional_lower_price_raises_share():
    rng = np.random.default_rng(7)
    spec = DistributorSpec(DistributorKind.INVERSE_PROPORTIONAL)
    for _ in range(1000):
        n = int(rng.integers(2, 5))
        prices = rng.uniform(0.05, 1.0, size=n)
        target = int(rng.integers(0, n))
        lowered = prices.copy()
        lowered[target] *= float(rng.uniform(0.1, 0.99))
        before = distribute(spec, bids(*prices.tolist()), 100.0, 1.0).served[IDS[target]]
        after = distribute(spec, bids(*lowered.tolist()), 100.0, 1.0).served[IDS[target]]
        assert after > before


@pytest.mark.parametrize("kind", [k for k in DistributorKind if k is not DistributorKind.SINGLE_AGENT_THRESHOLD])
def test_allocation_follows_agent_permutation(kind):
    rng = np.random.default_rng(11)
    spec = DistributorSpec(kind, 0.1 if kind is DistributorKind.SOFTMAX_NEG_PRICE else None)
    for _ in range(500):
        prices = rng.uniform(0.0, 2.0, size=4)
        budget = float(rng.uniform(0.0, 2.0))
        order = rng.permutation(4)
        straight = distribute(spec, bids(*prices.tolist()), 100.0, budget)
        shuffled = distribute(spec, [(IDS[i], float(prices[i])) for i in order], 100.0, budget)
        for agent_id in IDS:
            assert shuffled.served[agent_id] == pytest.approx(straight.served[agent_id], rel=1e-12, abs=1e-12)
        assert shuffled.dropped == straight.dropped

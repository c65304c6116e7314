#!/usr/bin/env python3
"""
Tests des types de base du marché et des récompenses.
"""

import sys
import os

import numpy as np
import pytest

# Ajouter le chemin pour importer
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.errors import ScenarioError
from src.market import PriceBounds, agent_revenue, single_agent_reward


@pytest.mark.parametrize(
    "price, budget, volume, expected",
    [
        (0.5, 1.0, 100, 50.0),
        (1.5, 1.0, 100, 0.0),
        (1.0, 1.0, 100, 100.0),
    ],
)
def test_single_agent_reward(price, budget, volume, expected):
    assert single_agent_reward(price, budget, volume) == pytest.approx(expected)


def test_single_agent_reward_monotone_in_volume():
    """La récompense ne décroît pas avec le volume."""
    rewards = [single_agent_reward(0.7, 1.0, v) for v in range(0, 200, 10)]
    assert rewards == sorted(rewards)


@pytest.mark.parametrize("budget", [0.05, 0.37, 0.5, 0.999, 1.0, 1.42, 2.0])
def test_single_agent_reward_grid_search_picks_largest_price_under_budget(budget):
    grid = np.linspace(0.0, 2.0, 201)
    rewards = [single_agent_reward(float(p), budget, 100.0) for p in grid]
    best = float(grid[int(np.argmax(rewards))])
    assert best == max(float(p) for p in grid if p <= budget)


@pytest.mark.parametrize("price, served, expected", [(2.0, 10, 20.0), (2.0, 0, 0.0), (0.0, 50, 0.0)])
def test_agent_revenue(price, served, expected):
    assert agent_revenue(price, served) == expected


def test_price_bounds_clamp():
    bounds = PriceBounds(0.0, 2.0)
    assert bounds.clamp(-1.0) == 0.0
    assert bounds.clamp(5.0) == 2.0
    assert bounds.clamp(1.25) == 1.25
    assert bounds.contains(2.0)
    assert not bounds.contains(2.0001)
    assert bounds.width == 2.0


@pytest.mark.parametrize("floor, ceiling", [(-0.1, 1.0), (1.0, 1.0), (2.0, 1.0)])
def test_price_bounds_invalid(floor, ceiling):
    with pytest.raises(ScenarioError):
        PriceBounds(floor, ceiling)

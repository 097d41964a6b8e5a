from __future__ import annotations

import numpy as np
import pytest

from mtdgame.env import EnvConfig


@pytest.fixture
def baseline() -> EnvConfig:
    """Default ten-server configuration used throughout."""
    return EnvConfig()


@pytest.fixture
def short(baseline) -> EnvConfig:
    """Same game with a 50-step horizon, for cheap rollouts."""
    from dataclasses import replace
    return replace(baseline, horizon=50)


def discounted_constant(reward: float, gamma: float, horizon: int) -> float:
    """Closed-form discounted sum of a constant per-step reward."""
    return reward * (1.0 - gamma ** horizon) / (1.0 - gamma)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(7)

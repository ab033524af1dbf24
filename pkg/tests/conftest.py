import random
from pathlib import Path

import pytest

from matbisim import parse_lts, parse_mrc, parse_partition

MODELS = Path(__file__).resolve().parents[1] / "models"


@pytest.fixture
def four_state():
    return parse_lts((MODELS / "four_state.lts").read_text())


@pytest.fixture
def tau_pair():
    return parse_lts((MODELS / "tau_pair.lts").read_text())


@pytest.fixture
def reward_chain():
    return parse_mrc((MODELS / "absorbing_reward.mrc").read_text())


@pytest.fixture
def fast_absorbing():
    return parse_mrc((MODELS / "fast_absorbing.mrc").read_text())


@pytest.fixture
def branching_witness():
    chain = parse_mrc((MODELS / "branching_not_weak.mrc").read_text())
    part = parse_partition((MODELS / "branching_not_weak.partition").read_text())
    return chain, part


@pytest.fixture
def rng():
    return random.Random(20240817)

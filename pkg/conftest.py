import numpy as np
import pytest

from gtml.auction.builders import build_environment
from gtml.config.settings import DEFAULT_CONFIG, load_config
from gtml.core import (
    BehaviorModel,
    BehaviorSpace,
    MechanismSpace,
    ParameterMechanism,
    SignalSpace,
    TabularEnvironment,
    UserDistribution,
    sup_distance,
)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte-Carlo acceptance checks (deselect with -m 'not slow')")


def toy_loss(mechanism):
    """b0 loses p, b1 loses 1 - p, for every user."""
    p = mechanism.values[0]
    return np.array([[-p] * 4, [-(1.0 - p)] * 4])


@pytest.fixture
def toy_users():
    return UserDistribution(("q",), np.ones(1), np.array([[0.5, 0.5]]))


@pytest.fixture
def toy_env(toy_users):
    """Two behaviors, the signal reveals the behavior; stationary law (0.75, 0.25) under toy_model."""
    behaviors = BehaviorSpace(["b0", "b1"])
    signals = SignalSpace(["h0", "h1"])
    signal_table = np.array([[0] * 4, [1] * 4])
    return TabularEnvironment(behaviors, signals, toy_users, toy_loss, signal_table, K=1.0, name="toy")


@pytest.fixture
def toy_model(toy_env):
    matrices = [
        [[0.9, 0.1], [0.2, 0.8]],
        [[0.5, 0.5], [0.3, 0.7]],
    ]
    return BehaviorModel(toy_env.behaviors, toy_env.signals, matrices, name="toy")


@pytest.fixture
def toy_space():
    members = [ParameterMechanism((p,)) for p in (0.0, 0.25, 0.5, 0.75, 1.0)]
    return MechanismSpace(members, sup_distance, name="toy-line")


@pytest.fixture
def desk_config():
    return load_config(DEFAULT_CONFIG)


@pytest.fixture
def small_config(desk_config):
    """Default game with short sweeps for end-to-end command tests."""
    experiment = desk_config.experiment.model_copy(update={
        "T1": [200, 400],
        "T2": [50, 100],
        "grid_sizes": [2, 3],
        "seeds": [0, 1],
        "simulate_T": 10,
    })
    bounds = desk_config.bounds.model_copy(update={"perturbations": 3})
    return desk_config.model_copy(update={"experiment": experiment, "bounds": bounds})


@pytest.fixture
def desk_env(desk_config):
    return build_environment(desk_config)

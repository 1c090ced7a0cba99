"""
Config-driven construction of the GSP environment, its reserve space and ground-truth models.
"""
import logging
from typing import Optional

import numpy as np

from gtml.auction.gsp import GspEnvironment, ReserveMechanism
from gtml.auction.models import make_adaptive_model, make_iid_model, make_signal_independent_model, make_true_model
from gtml.config.settings import GtmlConfig
from gtml.core.model import BehaviorModel, MechanismSpace
from gtml.core.spaces import UserDistribution

logger = logging.getLogger(__name__)


def user_distribution(config: GtmlConfig) -> UserDistribution:
    queries = config.auction.queries
    return UserDistribution(
        tuple(q.name for q in queries),
        np.array([q.prob for q in queries]),
        np.array([q.click_probs for q in queries]),
    )


def build_environment(config: GtmlConfig) -> GspEnvironment:
    env = GspEnvironment(
        config.auction.bid_grid,
        config.auction.advertisers,
        user_distribution(config),
        loss_bound=config.K,
        behavior_embedding=config.spaces.behavior_embedding,
        signal_embedding=config.spaces.signal_embedding,
        name=config.experiment.name,
    )
    logger.debug("environment %s: |B|=%s |H|=%s |U|=%s", env.name, env.behaviors.size, env.signals.size, env.users.support_size)
    return env


def reserve_space(config: GtmlConfig, env: Optional[GspEnvironment] = None) -> MechanismSpace:
    env = env or build_environment(config)
    return env.reserve_space(config.auction.reserve_grid)


def logging_mechanism(config: GtmlConfig, env: Optional[GspEnvironment] = None) -> ReserveMechanism:
    """The mechanism a0 under which behavior data is collected; defaults to the lowest grid reserve."""
    env = env or build_environment(config)
    reserves = config.auction.logging_reserves
    if reserves is None:
        reserves = [min(config.auction.reserve_grid)] * len(config.auction.queries)
    return env.mechanism(reserves)


def build_true_model(config: GtmlConfig, env: GspEnvironment, seed: Optional[int] = None) -> BehaviorModel:
    tm = config.true_model
    seed = tm.seed if seed is None else seed
    if tm.kind == "adaptive":
        return make_adaptive_model(env, tm.floor)
    if tm.kind == "signal_independent":
        return make_signal_independent_model(env.behaviors, env.signals, tm.floor, seed)
    if tm.kind == "iid":
        return make_iid_model(env.behaviors, env.signals, tm.floor, seed)
    return make_true_model(env.behaviors, env.signals, tm.floor, seed)

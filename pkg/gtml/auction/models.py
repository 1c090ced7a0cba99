"""
Ground-truth behavior model generators for experiments.

All generators mix their transition structure with a positivity floor rho, so every
entry is at least rho and the behavior chain is uniformly ergodic.
"""
import logging
from typing import Optional

import numpy as np

from gtml.auction.gsp import N_SLOTS, GspEnvironment
from gtml.core.errors import InputError
from gtml.core.model import BehaviorModel
from gtml.core.spaces import BehaviorSpace, SignalSpace

logger = logging.getLogger(__name__)


def _floor_mix(structure: np.ndarray, floor: float) -> np.ndarray:
    n = structure.shape[-1]
    if floor <= 0:
        raise InputError("positivity floor must be positive")
    if floor * n > 1.0 + 1e-12:
        raise InputError(f"floor {floor} times |B|={n} exceeds 1")
    mass = max(0.0, 1.0 - n * floor)
    out = floor + mass * structure
    return out / out.sum(axis=-1, keepdims=True)


def make_true_model(behaviors: BehaviorSpace, signals: SignalSpace, floor: float, seed: Optional[int] = None) -> BehaviorModel:
    """Random row-stochastic matrices per signal with every entry >= floor."""
    rng = np.random.default_rng(seed)
    n_b = behaviors.size
    structure = rng.dirichlet(np.ones(n_b), size=(signals.size, n_b))
    return BehaviorModel(behaviors, signals, _floor_mix(structure, floor), name=f"random-{seed}")


def make_signal_independent_model(behaviors: BehaviorSpace, signals: SignalSpace, floor: float, seed: Optional[int] = None) -> BehaviorModel:
    """One random matrix shared by every signal, so pi_a does not depend on a."""
    rng = np.random.default_rng(seed)
    n_b = behaviors.size
    structure = rng.dirichlet(np.ones(n_b), size=n_b)
    matrices = np.broadcast_to(_floor_mix(structure, floor), (signals.size, n_b, n_b))
    return BehaviorModel(behaviors, signals, matrices, name=f"signal-independent-{seed}")


def make_iid_model(behaviors: BehaviorSpace, signals: SignalSpace, floor: float, seed: Optional[int] = None) -> BehaviorModel:
    """Every row is the same distribution: i.i.d. behaviors."""
    rng = np.random.default_rng(seed)
    n_b = behaviors.size
    row = _floor_mix(rng.dirichlet(np.ones(n_b)), floor)
    matrices = np.broadcast_to(row, (signals.size, n_b, n_b))
    return BehaviorModel(behaviors, signals, matrices, name=f"iid-{seed}")


def _level_moves(n_levels: int, up: float, down: float) -> np.ndarray:
    """Per-advertiser level transition: one step up w.p. `up`, down w.p. `down`, clipped at the grid ends."""
    moves = np.zeros((n_levels, n_levels))
    for lvl in range(n_levels):
        moves[lvl, min(lvl + 1, n_levels - 1)] += up
        moves[lvl, max(lvl - 1, 0)] += down
        moves[lvl, lvl] += 1.0 - up - down
    return moves


def make_adaptive_model(
    env: GspEnvironment,
    floor: float,
    raise_prob: float = 0.6,
    lower_prob: float = 0.4,
    drift: float = 0.1,
) -> BehaviorModel:
    """
    Signal-responsive bidding.

    After fewer than two ads were shown (the reserve filtered someone out) advertisers raise
    their bid one grid level w.p. raise_prob; after full exposure with clicks on both slots they
    lower it w.p. lower_prob; otherwise bids drift one level either way w.p. drift/2 each.
    Advertisers move independently.
    """
    n_levels = len(env.bid_grid)
    levels = np.asarray(env.profile_levels)
    n_b = len(levels)
    matrices = np.zeros((env.signals.size, n_b, n_b))
    for hi, label in enumerate(env.signals):
        shown = int(label[len("shown")])
        clicks = int(label.rsplit("clicks", 1)[1])
        if shown < N_SLOTS:
            moves = _level_moves(n_levels, raise_prob, 0.0)
        elif clicks == N_SLOTS:
            moves = _level_moves(n_levels, 0.0, lower_prob)
        else:
            moves = _level_moves(n_levels, drift / 2, drift / 2)
        # joint move = product of per-advertiser level moves
        joint = np.ones((n_b, n_b))
        for adv in range(levels.shape[1]):
            joint *= moves[levels[:, adv][:, None], levels[:, adv][None, :]]
        matrices[hi] = joint
    logger.debug("adaptive model over %s profiles and %s signals", n_b, env.signals.size)
    return BehaviorModel(env.behaviors, env.signals, _floor_mix(matrices, floor), name="adaptive")

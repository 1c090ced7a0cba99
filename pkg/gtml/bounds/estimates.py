"""
Empirical lower estimates of the TV-Lipschitz constant alpha and the stability constant C(M*).
"""
import logging
from dataclasses import dataclass, field
from typing import Hashable, List, Optional, Tuple

import numpy as np

from gtml.core.environment import Environment
from gtml.core.errors import InputError, NotErgodicError
from gtml.core.model import BehaviorModel, MechanismSpace
from gtml.markov.engine import marginal_kernel, model_inf_distance, stationary_distribution, tv_distance

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LipschitzEstimate:
    alpha: float
    pairs: int
    argmax: Optional[Tuple[Hashable, Hashable]] = None


def lipschitz_estimate(space: MechanismSpace, model: BehaviorModel, env: Environment) -> LipschitzEstimate:
    """max over pairs of TV(pi_a, pi_a') / d_A(a, a'); a lower bound on alpha."""
    members = space.ordered()
    if len(members) < 2:
        raise InputError("need at least two mechanisms to estimate a Lipschitz constant")
    pis = [stationary_distribution(marginal_kernel(model, m, env)).probs for m in members]
    best, argmax, pairs = 0.0, None, 0
    for i in range(len(members)):
        for j in range(i + 1, len(members)):
            d = space.distance(members[i], members[j])
            if d <= 0:
                continue
            pairs += 1
            ratio = tv_distance(pis[i], pis[j]) / d
            if argmax is None or ratio > best:
                best, argmax = ratio, (members[i].key, members[j].key)
    if pairs == 0:
        raise InputError("all pairwise mechanism distances are zero")
    return LipschitzEstimate(best, pairs, argmax)


def stability_ratio(model: BehaviorModel, perturbed: BehaviorModel, env: Environment, mechanism) -> float:
    """TV(pi(M), pi(M')) / ||M - M'||_inf under one mechanism."""
    dist = model_inf_distance(model, perturbed)
    if dist <= 0:
        raise InputError("models coincide; the stability ratio is undefined")
    pi = stationary_distribution(marginal_kernel(model, mechanism, env))
    pi_prime = stationary_distribution(marginal_kernel(perturbed, mechanism, env))
    return tv_distance(pi, pi_prime) / dist


def perturb_model(model: BehaviorModel, magnitude: float, rng: np.random.Generator) -> BehaviorModel:
    """Move every row toward a random distribution; the largest row moves exactly `magnitude` in L1."""
    target = rng.dirichlet(np.ones(model.behaviors.size), size=model.matrices.shape[:2])
    direction = target - model.matrices
    largest = float(np.abs(direction).sum(axis=-1).max())
    step = min(1.0, magnitude / largest) if largest > 0 else 0.0
    return BehaviorModel(model.behaviors, model.signals, model.matrices + step * direction, name=f"{model.name}~")


@dataclass
class StabilityEstimate:
    C_hat: float
    used: int
    skipped: int
    ratios: List[float] = field(default_factory=list)


def stability_constant_estimate(
    model: BehaviorModel,
    env: Environment,
    mechanism,
    n_perturbations: int = 20,
    magnitude: float = 0.05,
    seed: Optional[int] = None,
) -> StabilityEstimate:
    """
    Largest TV(pi(M), pi(M')) / ||M - M'||_inf over random row-stochastic perturbations M'.

    Perturbations are drawn sequentially from one stream, so n + 1 perturbations extend the
    first n. Perturbations that break ergodicity are skipped and counted.
    """
    if n_perturbations < 1:
        raise InputError("need at least one perturbation")
    if magnitude <= 0:
        raise InputError("perturbation magnitude must be positive")
    rng = np.random.default_rng(seed)
    ratios, skipped = [], 0
    for _ in range(n_perturbations):
        perturbed = perturb_model(model, magnitude, rng)
        if model_inf_distance(model, perturbed) <= 0:
            skipped += 1
            continue
        try:
            ratios.append(stability_ratio(model, perturbed, env, mechanism))
        except NotErgodicError:
            skipped += 1
    if skipped:
        logger.info("stability estimate skipped %s of %s perturbations", skipped, n_perturbations)
    return StabilityEstimate(max(ratios, default=0.0), len(ratios), skipped, ratios)

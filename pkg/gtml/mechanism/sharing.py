"""
delta-sample sharing.

Behavior sequences are simulated against one shared user sequence. A mechanism reuses the
sequence of the first registered representative within the sharing radius (insertion order);
otherwise it simulates its own and becomes a representative.

Rules:
  "d_A"  radius on the mechanism distance
  "tv"   radius on the TV distance between stationary behavior distributions under the model
  None   no sharing: every mechanism gets its own sequence
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Hashable, List, Optional

import numpy as np

from gtml.core.environment import Environment
from gtml.core.errors import InputError
from gtml.core.model import BehaviorModel
from gtml.markov.engine import marginal_kernel, simulate_behaviors, stationary_distribution, tv_distance
from gtml.utils.seeding import task_rng

logger = logging.getLogger(__name__)

RULES = ("d_A", "tv", None)


def tv_rule_distance(a, a_prime, model: BehaviorModel, env: Environment) -> float:
    """TV distance between the stationary behavior distributions induced by a and a' under model."""
    pi_a = stationary_distribution(marginal_kernel(model, a, env))
    pi_b = stationary_distribution(marginal_kernel(model, a_prime, env))
    return tv_distance(pi_a, pi_b)


@dataclass
class CacheEntry:
    representative: object
    behaviors: np.ndarray
    signals: np.ndarray
    stream: int


@dataclass
class SampleSharingCache:
    """
    Cache of behavior sequences keyed by representative mechanisms.

    `distance` is the mechanism distance used by the "d_A" rule.
    """

    users: np.ndarray
    radius: float
    rule: Optional[str] = "d_A"
    distance: Optional[Callable[[object, object], float]] = None
    entries: List[CacheEntry] = field(default_factory=list)
    hits: int = 0
    lookups: int = 0
    assignments: Dict[Hashable, Hashable] = field(default_factory=dict)
    _stationary: Dict[Hashable, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.rule not in RULES:
            raise InputError(f"unknown sharing rule {self.rule!r}; expected one of {RULES}")
        if self.radius < 0:
            raise InputError("sharing radius must be non-negative")
        users = np.asarray(self.users, dtype=int)
        if users.ndim != 1 or len(users) < 1:
            raise InputError("shared user sequence must be non-empty")
        users.setflags(write=False)
        self.users = users
        if self.rule == "d_A" and self.distance is None:
            raise InputError("the d_A rule needs a mechanism distance")

    @property
    def T2(self) -> int:
        return len(self.users)

    @property
    def generated(self) -> int:
        return len(self.entries)

    def _pi(self, mechanism, model: BehaviorModel, env: Environment) -> np.ndarray:
        key = mechanism.key
        if key not in self._stationary:
            self._stationary[key] = stationary_distribution(marginal_kernel(model, mechanism, env)).probs
        return self._stationary[key]

    def gap(self, a, b, model: BehaviorModel, env: Environment) -> float:
        """Distance between two mechanisms under the active rule."""
        if self.rule == "d_A":
            return float(self.distance(a, b))
        if self.rule == "tv":
            return tv_distance(self._pi(a, model, env), self._pi(b, model, env))
        return 0.0 if a.key == b.key else np.inf

    def lookup(self, mechanism, model: BehaviorModel, env: Environment) -> Optional[CacheEntry]:
        for entry in self.entries:
            if self.gap(mechanism, entry.representative, model, env) <= self.radius:
                return entry
        return None


def resolve_sample(mechanism, cache: SampleSharingCache, model: BehaviorModel, env: Environment, seed: Optional[int] = None) -> np.ndarray:
    """
    Behavior index sequence s(a, delta) for `mechanism`.

    A new representative's sequence uses stream index = its registration position, so a fixed
    seed and enumeration order reproduce the cache exactly.
    """
    cache.lookups += 1
    entry = cache.lookup(mechanism, model, env)
    if entry is not None:
        cache.hits += 1
        cache.assignments[mechanism.key] = entry.representative.key
        return entry.behaviors

    stream = len(cache.entries)
    behaviors, signals = simulate_behaviors(model, mechanism, env, cache.users, task_rng(seed, stream), init="stationary")
    behaviors.setflags(write=False)
    cache.entries.append(CacheEntry(mechanism, behaviors, signals, stream))
    cache.assignments[mechanism.key] = mechanism.key
    logger.debug("cache miss for %s: generated sequence #%s", mechanism.key, stream)
    return behaviors

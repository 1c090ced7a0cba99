"""
Greedy covers of finite mechanism spaces under d_A or the induced TV metric.

A greedy net is an upper bound on the minimal covering number; `minimal_cover_size`
computes the exact value by exhaustive search for small spaces.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Dict, Hashable, List, Optional

import numpy as np

from gtml.core.environment import Environment
from gtml.core.errors import InputError
from gtml.core.model import BehaviorModel, MechanismSpace
from gtml.markov.engine import marginal_kernel, stationary_distribution

logger = logging.getLogger(__name__)

METRICS = ("d_A", "tv")
MAX_BRUTE_FORCE = 16


@dataclass(frozen=True)
class CoverReport:
    radius: float
    metric: str
    representatives: List
    assignment: Dict[Hashable, int]

    @property
    def cardinality(self) -> int:
        return len(self.representatives)

    def partition(self) -> List[List[Hashable]]:
        """Members grouped by representative, in representative order."""
        groups: List[List[Hashable]] = [[] for _ in self.representatives]
        for key, idx in self.assignment.items():
            groups[idx].append(key)
        return groups


def induced_tv_matrix(space: MechanismSpace, model: BehaviorModel, env: Environment) -> np.ndarray:
    """Pairwise TV distances between stationary behavior distributions, in enumeration order."""
    pis = np.array([stationary_distribution(marginal_kernel(model, m, env)).probs for m in space.ordered()])
    return 0.5 * np.abs(pis[:, None, :] - pis[None, :, :]).sum(axis=-1)


def _distance_matrix(space: MechanismSpace, metric: str, model, env) -> np.ndarray:
    if metric not in METRICS:
        raise InputError(f"unknown metric {metric!r}; expected one of {METRICS}")
    if metric == "tv":
        if model is None or env is None:
            raise InputError("the induced TV metric needs a behavior model and an environment")
        return induced_tv_matrix(space, model, env)
    return space.subset(space.ordered()).pairwise()


def cover(
    space: MechanismSpace,
    radius: float,
    metric: str = "d_A",
    model: Optional[BehaviorModel] = None,
    env: Optional[Environment] = None,
) -> CoverReport:
    """First-fit greedy net over the members in enumeration order."""
    if radius < 0:
        raise InputError("cover radius must be non-negative")
    members = space.ordered()
    d = _distance_matrix(space, metric, model, env)
    reps: List[int] = []
    assignment: Dict[Hashable, int] = {}
    for i, mech in enumerate(members):
        for r_idx, rep in enumerate(reps):
            if d[i, rep] <= radius:
                assignment[mech.key] = r_idx
                break
        else:
            assignment[mech.key] = len(reps)
            reps.append(i)
    logger.debug("greedy %s cover at radius %g: %s of %s members", metric, radius, len(reps), len(members))
    return CoverReport(radius, metric, [members[i] for i in reps], assignment)


def minimal_cover_size(
    space: MechanismSpace,
    radius: float,
    metric: str = "d_A",
    model: Optional[BehaviorModel] = None,
    env: Optional[Environment] = None,
) -> int:
    """Smallest number of members whose radius-balls cover the space (exhaustive search)."""
    n = len(space)
    if n > MAX_BRUTE_FORCE:
        raise InputError(f"exhaustive cover search is limited to {MAX_BRUTE_FORCE} members, got {n}")
    within = _distance_matrix(space, metric, model, env) <= radius
    for k in range(1, n + 1):
        for centers in itertools.combinations(range(n), k):
            if within[list(centers)].any(axis=0).all():
                return k
    return n


@dataclass(frozen=True)
class NestedCoverReport:
    d_a_cover: CoverReport
    tv_cover: CoverReport
    alpha: float
    max_tv_to_representative: float

    @property
    def holds(self) -> bool:
        """Every member is within TV distance delta * alpha of its d_A representative."""
        return self.max_tv_to_representative <= self.d_a_cover.radius * self.alpha + 1e-12


def nested_cover(space: MechanismSpace, delta: float, model: BehaviorModel, env: Environment, alpha: float) -> NestedCoverReport:
    """First-layer covers: the d_A delta-cover and the greedy TV cover at radius delta * alpha."""
    outer = cover(space, delta, "d_A")
    inner = cover(space, delta * alpha, "tv", model, env)
    members = space.ordered()
    tv = induced_tv_matrix(space, model, env)
    position = {m.key: i for i, m in enumerate(members)}
    worst = 0.0
    for key, rep_idx in outer.assignment.items():
        rep_key = outer.representatives[rep_idx].key
        worst = max(worst, float(tv[position[key], position[rep_key]]))
    return NestedCoverReport(outer, inner, alpha, worst)

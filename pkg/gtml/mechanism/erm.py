"""
Empirical risk minimization over a finite mechanism space.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Hashable, List, Optional, Union

import numpy as np
import pandas as pd

from gtml.core.environment import Environment
from gtml.core.errors import InputError
from gtml.core.model import BehaviorModel, MechanismSpace
from gtml.markov.engine import exact_risk
from gtml.mechanism.sharing import SampleSharingCache, resolve_sample

logger = logging.getLogger(__name__)


def sequence_risk(mechanism, env: Environment, behaviors: np.ndarray, users: np.ndarray) -> float:
    """(1/T2) sum_t L(a, b_t, u_t) for index sequences of equal length."""
    behaviors = np.asarray(behaviors, dtype=int)
    users = np.asarray(users, dtype=int)
    if len(users) < 1 or behaviors.shape != users.shape:
        raise InputError("behavior and user sequences must be non-empty and of equal length")
    return float(env.loss_table(mechanism)[behaviors, users].mean())


def empirical_risk(mechanism, model: BehaviorModel, env: Environment, cache: SampleSharingCache, seed: Optional[int] = None) -> float:
    """R_T2(a, M, delta) over the shared users and the resolved behavior sequence."""
    behaviors = resolve_sample(mechanism, cache, model, env, seed)
    return sequence_risk(mechanism, env, behaviors, cache.users)


@dataclass(frozen=True)
class CandidateRisk:
    mechanism: object
    empirical_risk: float
    cache_hit: bool
    representative: Hashable
    exact_risk: Optional[float] = None


@dataclass
class ErmResult:
    best: object
    risk: float
    table: List[CandidateRisk]
    hits: int
    generated: int
    T2: int
    radius: float
    rule: Optional[str]

    def risks(self) -> Dict[Hashable, float]:
        return {row.mechanism.key: row.empirical_risk for row in self.table}

    def with_exact(self, exact_risks: Dict[Hashable, float]) -> "ErmResult":
        table = [
            CandidateRisk(r.mechanism, r.empirical_risk, r.cache_hit, r.representative, exact_risks.get(r.mechanism.key))
            for r in self.table
        ]
        return ErmResult(self.best, self.risk, table, self.hits, self.generated, self.T2, self.radius, self.rule)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for r in self.table:
            row = dict(r.mechanism.params())
            row["empirical_risk"] = r.empirical_risk
            row["exact_risk"] = r.exact_risk
            row["cache_hit"] = r.cache_hit
            rows.append(row)
        return pd.DataFrame(rows)

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path


def erm_search(
    space: MechanismSpace,
    model: BehaviorModel,
    env: Environment,
    users: np.ndarray,
    delta: float,
    rule: Optional[str] = "d_A",
    seed: Optional[int] = None,
) -> ErmResult:
    """
    Evaluate every mechanism in ascending key order through one sharing cache and return
    the minimizer; ties go to the lexicographically smallest key.

    For rule="tv", `delta` is the TV radius.
    """
    if len(space) == 0:
        raise InputError("mechanism space is empty")
    cache = SampleSharingCache(users, delta, rule, distance=space.distance)
    table = []
    for mech in space.ordered():
        hits_before = cache.hits
        risk = empirical_risk(mech, model, env, cache, seed)
        table.append(CandidateRisk(mech, risk, cache.hits > hits_before, cache.assignments[mech.key]))

    # ordered() is ascending in key, so the first strict minimum is the tie-break winner
    best = min(table, key=lambda r: r.empirical_risk)
    logger.debug(
        "ERM over %s mechanisms: best %s risk %.6f (%s sequences, %s hits)",
        len(table), best.mechanism.key, best.empirical_risk, cache.generated, cache.hits,
    )
    return ErmResult(best.mechanism, best.empirical_risk, table, cache.hits, cache.generated, cache.T2, delta, rule)


def sup_deviation(result: ErmResult, exact_risks: Dict[Hashable, float]) -> float:
    """sup_a |R_T2(a, M, delta) - R(a, M)| over the evaluated table."""
    missing = [r.mechanism.key for r in result.table if r.mechanism.key not in exact_risks]
    if missing:
        raise InputError(f"exact risks missing for {len(missing)} mechanisms, e.g. {missing[0]}")
    return float(max(abs(r.empirical_risk - exact_risks[r.mechanism.key]) for r in result.table))


def exact_risk_table(space: MechanismSpace, model: BehaviorModel, env: Environment) -> Dict[Hashable, float]:
    """R(a, M) for every member, keyed by mechanism key."""
    return {mech.key: exact_risk(mech, model, env) for mech in space.ordered()}

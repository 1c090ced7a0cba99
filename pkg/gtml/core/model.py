"""
Behavior model, mechanism abstractions, loss/signal contracts and trajectories.
"""
import itertools
from dataclasses import dataclass, field
from typing import Callable, Dict, Hashable, Iterable, Iterator, List, NamedTuple, Optional, Protocol, Sequence, Tuple

import numpy as np

from gtml.core.errors import InputError
from gtml.core.spaces import BehaviorSpace, SignalSpace, UserDistribution, UserSample

STOCHASTIC_TOL = 1e-9


class BehaviorModel:
    """
    Per-signal transition matrices M_h(b, b') over a finite behavior space.

    `matrices` has shape (|H|, |B|, |B|) and is indexed by signal position first.
    Construction only checks shapes; stochasticity is reported by `validate_model`.
    """

    def __init__(self, behaviors: BehaviorSpace, signals: SignalSpace, matrices, name: str = "model"):
        arr = np.array(matrices, dtype=float)
        expected = (signals.size, behaviors.size, behaviors.size)
        if arr.shape != expected:
            raise InputError(f"matrices must have shape {expected}, got {arr.shape}")
        arr.setflags(write=False)
        self.behaviors = behaviors
        self.signals = signals
        self.matrices = arr
        self.name = name

    @classmethod
    def from_mapping(cls, behaviors: BehaviorSpace, signals: SignalSpace, mapping: Dict[str, Sequence], name: str = "model"):
        """Build from {signal label: |B|x|B| matrix}; every signal label must be present."""
        missing = [h for h in signals if h not in mapping]
        extra = [h for h in mapping if h not in signals]
        if missing or extra:
            raise InputError(f"one matrix per signal label required (missing={missing}, unknown={extra})")
        return cls(behaviors, signals, [mapping[h] for h in signals], name=name)

    def matrix(self, signal: str) -> np.ndarray:
        return self.matrices[self.signals.index(signal)]

    def row(self, signal: str, behavior: str) -> np.ndarray:
        return self.matrices[self.signals.index(signal), self.behaviors.index(behavior)]

    def same_spaces(self, other: "BehaviorModel") -> bool:
        return self.behaviors == other.behaviors and self.signals == other.signals

    def __repr__(self) -> str:
        return f"BehaviorModel(name={self.name!r}, |B|={self.behaviors.size}, |H|={self.signals.size})"


class Violation(NamedTuple):
    """One failed stochasticity check; `col` is None for row-sum violations."""

    signal: str
    row: str
    col: Optional[str]
    kind: str
    value: float


def validate_model(model: BehaviorModel, tol: float = STOCHASTIC_TOL) -> List[Violation]:
    violations: List[Violation] = []
    for hi, h in enumerate(model.signals):
        mat = model.matrices[hi]
        for bi, b in enumerate(model.behaviors):
            row = mat[bi]
            for ci in np.flatnonzero(~np.isfinite(row) | (row < 0)):
                violations.append(Violation(h, b, model.behaviors.label(ci), "negative_entry", float(row[ci])))
            total = float(row.sum())
            if not np.isfinite(total) or abs(total - 1.0) > tol:
                violations.append(Violation(h, b, None, "row_sum", total))
    return violations


# === MECHANISMS ===

class Mechanism(Protocol):
    """A mechanism the environment can evaluate; `key` is hashable and totally ordered."""

    @property
    def key(self) -> Tuple: ...

    def params(self) -> Dict[str, float]: ...


class MechanismSpace:
    """Finite enumerable mechanism space with a distance d_A."""

    def __init__(self, members: Iterable, distance: Callable[[object, object], float], name: str = "space"):
        self.members = list(members)
        self._distance = distance
        self.name = name
        keys = [m.key for m in self.members]
        if len(set(keys)) != len(keys):
            raise InputError("mechanism keys must be unique within a space")

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator:
        return iter(self.members)

    def distance(self, a, b) -> float:
        return float(self._distance(a, b))

    def ordered(self) -> list:
        """Members in enumeration order: ascending lexicographic key."""
        return sorted(self.members, key=lambda m: m.key)

    def pairwise(self) -> np.ndarray:
        n = len(self.members)
        out = np.zeros((n, n))
        for i, j in itertools.combinations(range(n), 2):
            out[i, j] = out[j, i] = self.distance(self.members[i], self.members[j])
        return out

    def diameter(self) -> float:
        if len(self.members) < 2:
            return 0.0
        return float(self.pairwise().max())

    def triangle_violations(self, tol: float = 1e-12) -> List[Tuple[int, int, int]]:
        """Index triples (i, j, k) with d(i, k) > d(i, j) + d(j, k) + tol."""
        d = self.pairwise()
        n = len(self.members)
        bad = []
        for i, j, k in itertools.product(range(n), repeat=3):
            if d[i, k] > d[i, j] + d[j, k] + tol:
                bad.append((i, j, k))
        return bad

    def subset(self, members: Sequence, name: Optional[str] = None) -> "MechanismSpace":
        return MechanismSpace(members, self._distance, name=name or self.name)


# === LOSS AND SIGNAL CONTRACTS ===

@dataclass(frozen=True)
class LossFunction:
    """L(a, b, u) with values in [-K, 0]; b is a behavior label, u a UserSample."""

    bound: float
    evaluator: Callable[[object, str, UserSample], float]

    def __post_init__(self):
        if not self.bound > 0:
            raise InputError("loss bound K must be positive")

    def __call__(self, mechanism, behavior: str, user: UserSample) -> float:
        return float(self.evaluator(mechanism, behavior, user))


@dataclass(frozen=True)
class SignalFunction:
    """sig(a, b, u) returning a signal label."""

    evaluator: Callable[[object, str, UserSample], str]

    def __call__(self, mechanism, behavior: str, user: UserSample) -> str:
        return self.evaluator(mechanism, behavior, user)


# === TRAJECTORIES ===

@dataclass(frozen=True)
class Trajectory:
    """Time-ordered (b_t, h_t, u_t) records stored as index arrays."""

    behaviors: np.ndarray
    signals: np.ndarray
    users: np.ndarray
    behavior_space: BehaviorSpace = field(repr=False)
    signal_space: SignalSpace = field(repr=False)
    user_dist: UserDistribution = field(repr=False)
    mechanism_key: Hashable = None
    seed: Optional[int] = None

    def __post_init__(self):
        b = np.asarray(self.behaviors, dtype=int)
        h = np.asarray(self.signals, dtype=int)
        u = np.asarray(self.users, dtype=int)
        if b.ndim != 1 or len(b) < 1:
            raise InputError("trajectory needs at least one record")
        if h.shape != b.shape or u.shape != b.shape:
            raise InputError("behaviors, signals and users must have equal length")
        for arr in (b, h, u):
            arr.setflags(write=False)
        object.__setattr__(self, "behaviors", b)
        object.__setattr__(self, "signals", h)
        object.__setattr__(self, "users", u)

    def __len__(self) -> int:
        return len(self.behaviors)

    def records(self) -> List[Tuple[str, str, UserSample]]:
        return [
            (self.behavior_space.label(b), self.signal_space.label(h), self.user_dist.user(u))
            for b, h, u in zip(self.behaviors, self.signals, self.users)
        ]


@dataclass(frozen=True, order=True)
class ParameterMechanism:
    """Mechanism given by a plain parameter vector; used with tabular environments."""

    values: Tuple[float, ...]

    @property
    def key(self) -> Tuple[float, ...]:
        return tuple(self.values)

    def params(self) -> Dict[str, float]:
        return {f"p{i}": float(v) for i, v in enumerate(self.values)}


def sup_distance(a, b) -> float:
    """max_i |a_i - b_i| over mechanism keys."""
    return float(np.max(np.abs(np.asarray(a.key, dtype=float) - np.asarray(b.key, dtype=float))))

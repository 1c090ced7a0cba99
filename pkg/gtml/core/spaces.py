"""
Finite spaces of the game: behaviors, signals and users.

Labels are kept in a fixed order; every array in the package indexes behaviors,
signals and user-support points by their position in these spaces.
"""
import itertools
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Sequence, Tuple

import numpy as np

from gtml.core.errors import InputError

PROB_TOL = 1e-12


def default_embedding(size: int) -> np.ndarray:
    """Index scaled to [0, 1], one column."""
    if size == 1:
        return np.zeros((1, 1))
    return (np.arange(size, dtype=float) / (size - 1)).reshape(-1, 1)


def _as_embedding(embedding, size: int, name: str) -> np.ndarray:
    if embedding is None:
        return default_embedding(size)
    arr = np.array(embedding, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[0] != size:
        raise InputError(f"{name} embedding must have one row per label ({size}), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} embedding contains non-finite values")
    return arr


class _LabelSpace:
    """Ordered, unique labels with a numeric embedding per label."""

    kind = "label"
    min_size = 1

    def __init__(self, labels: Sequence[str], embedding=None):
        labels = tuple(str(label) for label in labels)
        if len(labels) < self.min_size:
            raise InputError(f"{self.kind} space needs at least {self.min_size} labels, got {len(labels)}")
        if len(set(labels)) != len(labels):
            raise InputError(f"{self.kind} labels must be unique")
        self.labels: Tuple[str, ...] = labels
        self.embedding = _as_embedding(embedding, len(labels), self.kind)
        self.embedding.setflags(write=False)
        self._index: Dict[str, int] = {label: i for i, label in enumerate(labels)}

    @property
    def size(self) -> int:
        return len(self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def __contains__(self, label) -> bool:
        return label in self._index

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise InputError(f"unknown {self.kind} label {label!r}") from None

    def label(self, index: int) -> str:
        return self.labels[index]

    def __eq__(self, other) -> bool:
        return (
            type(self) is type(other)
            and self.labels == other.labels
            and np.array_equal(self.embedding, other.embedding)
        )

    def __hash__(self) -> int:
        return hash((type(self).__name__, self.labels))

    def __repr__(self) -> str:
        return f"{type(self).__name__}({list(self.labels)!r})"


class BehaviorSpace(_LabelSpace):
    kind = "behavior"
    min_size = 2


class SignalSpace(_LabelSpace):
    kind = "signal"
    min_size = 1


class UserSample(NamedTuple):
    """One user arrival: the issued query and the click vector over ad slots."""

    query: str
    clicks: Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class UserDistribution:
    """
    Queries with probabilities and independent per-slot click probabilities.

    The support is finite: every (query, click vector) pair, enumerated query-major
    with click vectors in lexicographic order.
    """

    queries: Tuple[str, ...]
    probs: np.ndarray
    click_probs: np.ndarray
    _support: List[UserSample] = field(init=False, repr=False, compare=False)
    _support_probs: np.ndarray = field(init=False, repr=False, compare=False)
    _query_of: np.ndarray = field(init=False, repr=False, compare=False)
    _clicks: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        queries = tuple(str(q) for q in self.queries)
        probs = np.array(self.probs, dtype=float)
        click_probs = np.array(self.click_probs, dtype=float)
        if not queries:
            raise InputError("user distribution needs at least one query")
        if len(set(queries)) != len(queries):
            raise InputError("query names must be unique")
        if probs.shape != (len(queries),):
            raise InputError("one probability per query is required")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > PROB_TOL:
            raise InputError(f"query probabilities must be non-negative and sum to 1, got {probs.sum()!r}")
        if click_probs.ndim != 2 or click_probs.shape[0] != len(queries):
            raise InputError("click_probs must be a (queries x slots) array")
        if np.any(click_probs < 0) or np.any(click_probs > 1):
            raise InputError("click probabilities must lie in [0, 1]")

        n_slots = click_probs.shape[1]
        support, support_probs, query_of, clicks = [], [], [], []
        for qi, query in enumerate(queries):
            for c in itertools.product((0, 1), repeat=n_slots):
                p = probs[qi]
                for slot, ci in enumerate(c):
                    p *= click_probs[qi, slot] if ci else 1.0 - click_probs[qi, slot]
                support.append(UserSample(query, tuple(c)))
                support_probs.append(p)
                query_of.append(qi)
                clicks.append(c)

        object.__setattr__(self, "queries", queries)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "click_probs", click_probs)
        object.__setattr__(self, "_support", support)
        object.__setattr__(self, "_support_probs", np.asarray(support_probs))
        object.__setattr__(self, "_query_of", np.asarray(query_of, dtype=int))
        object.__setattr__(self, "_clicks", np.asarray(clicks, dtype=int).reshape(len(support), n_slots))
        for arr in (probs, click_probs, self._support_probs, self._query_of, self._clicks):
            arr.setflags(write=False)

    @classmethod
    def single(cls, query: str = "q", clicks: Sequence[int] = (1, 1)) -> "UserDistribution":
        """Degenerate distribution with one query and a deterministic click vector."""
        return cls((query,), np.ones(1), np.asarray([clicks], dtype=float))

    @property
    def n_slots(self) -> int:
        return self.click_probs.shape[1]

    @property
    def support(self) -> List[UserSample]:
        return list(self._support)

    @property
    def support_probs(self) -> np.ndarray:
        return self._support_probs

    @property
    def support_size(self) -> int:
        return len(self._support)

    def user(self, index: int) -> UserSample:
        return self._support[index]

    def query_index(self, user_index) -> np.ndarray:
        return self._query_of[user_index]

    def clicks(self, user_index) -> np.ndarray:
        return self._clicks[user_index]

    def index_of(self, user: UserSample) -> int:
        try:
            return self._support.index(UserSample(user[0], tuple(int(c) for c in user[1])))
        except ValueError:
            raise InputError(f"user sample {user!r} is not in the support") from None

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw n i.i.d. support indices."""
        if n < 0:
            raise InputError("sample size must be non-negative")
        return rng.choice(self.support_size, size=n, p=self._support_probs).astype(int)

    def __hash__(self) -> int:
        return hash((self.queries, self.probs.tobytes(), self.click_probs.tobytes()))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, UserDistribution)
            and self.queries == other.queries
            and np.array_equal(self.probs, other.probs)
            and np.array_equal(self.click_probs, other.click_probs)
        )

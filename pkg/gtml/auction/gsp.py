"""
Two-slot GSP auctions with query-dependent reserve prices.

An ad is shown when its bid clears the reserve (bid >= r); the ad in slot i pays
max(next bid, r) per click. Click-through rates are absorbed into the bids.
"""
import itertools
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from gtml.core.environment import Environment
from gtml.core.errors import InputError
from gtml.core.model import LossFunction, MechanismSpace, SignalFunction
from gtml.core.spaces import BehaviorSpace, SignalSpace, UserDistribution, UserSample

N_SLOTS = 2

# Signal labels, shown-count major: shown{0,1,2} x clicks{0,1,2}
SIGNAL_LABELS = [f"shown{s}_clicks{c}" for s in range(N_SLOTS + 1) for c in range(N_SLOTS + 1)]


@dataclass(frozen=True)
class ReserveMechanism:
    """a: Q -> R+, one reserve price per query."""

    queries: Tuple[str, ...]
    reserves: Tuple[float, ...]

    def __post_init__(self):
        if len(self.queries) != len(self.reserves):
            raise InputError("one reserve per query is required")
        if any(r < 0 for r in self.reserves):
            raise InputError("reserve prices must be non-negative")

    @property
    def key(self) -> Tuple[float, ...]:
        return tuple(self.reserves)

    def reserve(self, query: str) -> float:
        try:
            return self.reserves[self.queries.index(query)]
        except ValueError:
            raise InputError(f"query {query!r} is not in the mechanism's domain") from None

    def params(self) -> Dict[str, float]:
        return {f"reserve_{q}": float(r) for q, r in zip(self.queries, self.reserves)}


def reserve_distance(a: ReserveMechanism, b: ReserveMechanism) -> float:
    """d_A(a, a') = max_q |a(q) - a'(q)|."""
    if a.queries != b.queries:
        raise InputError("mechanisms are defined over different queries")
    return max(abs(x - y) for x, y in zip(a.reserves, b.reserves))


@dataclass(frozen=True)
class BidProfile:
    bids: Tuple[float, ...]

    @property
    def top3(self) -> Tuple[float, float, float]:
        ranked = sorted(self.bids, reverse=True) + [0.0, 0.0, 0.0]
        return ranked[0], ranked[1], ranked[2]

    @property
    def label(self) -> str:
        return ":".join(f"{b:g}" for b in self.bids)


def _top3(bids: Union[BidProfile, Sequence[float]]) -> Tuple[float, float, float]:
    if isinstance(bids, BidProfile):
        return bids.top3
    top = [float(b) for b in bids]
    if any(x < y for x, y in zip(top, top[1:])):
        raise InputError("bids must be sorted in decreasing order")
    top += [0.0, 0.0, 0.0]
    return top[0], top[1], top[2]


def gsp_revenue(r: float, bids: Union[BidProfile, Sequence[float]], clicks: Sequence[int]) -> float:
    """
    Revenue of one two-slot GSP auction with reserve r.

    Branches: (b2, b1] -> r c1; (b3, b2] -> b2 c1 + r c2; [0, b3] -> b2 c1 + b3 c2;
    r > b1 -> 0.
    """
    if r < 0:
        raise InputError("reserve price must be non-negative")
    b1, b2, b3 = _top3(bids)
    c1, c2 = clicks[0], clicks[1]
    if r > b1:
        return 0.0
    if r > b2:
        return r * c1
    if r > b3:
        return b2 * c1 + r * c2
    return b2 * c1 + b3 * c2


def shown_count(r: float, profile: BidProfile) -> int:
    ranked = sorted(profile.bids, reverse=True)[:N_SLOTS]
    return sum(1 for b in ranked if b >= r)


def signal_label(shown: int, clicks: int) -> str:
    """Canonical label; click counts above the shown count fold onto the feasible pair."""
    shown = max(0, min(int(shown), N_SLOTS))
    clicks = max(0, min(int(clicks), shown))
    return f"shown{shown}_clicks{clicks}"


class GspEnvironment(Environment):
    """
    The sponsored-search game: behaviors are joint bid profiles on a grid, users are
    (query, click vector) pairs, loss is negative revenue.
    """

    def __init__(
        self,
        bid_grid: Sequence[float],
        advertisers: int,
        users: UserDistribution,
        loss_bound: float = None,
        behavior_embedding=None,
        signal_embedding=None,
        name: str = "gsp",
    ):
        if advertisers < 2:
            raise InputError("at least two advertisers are required")
        if users.n_slots != N_SLOTS:
            raise InputError(f"click probabilities must cover exactly {N_SLOTS} slots")
        self.bid_grid = tuple(sorted(float(b) for b in bid_grid))
        if len(set(self.bid_grid)) != len(self.bid_grid) or self.bid_grid[0] <= 0:
            raise InputError("bid grid must hold distinct positive values")
        self.advertisers = advertisers
        self.max_bid = self.bid_grid[-1]

        # grid-index tuples in lexicographic order fix the behavior label order
        self.profile_levels: List[Tuple[int, ...]] = list(
            itertools.product(range(len(self.bid_grid)), repeat=advertisers)
        )
        self.profiles: List[BidProfile] = [
            BidProfile(tuple(self.bid_grid[i] for i in levels)) for levels in self.profile_levels
        ]
        self._profile_by_label: Dict[str, BidProfile] = {p.label: p for p in self.profiles}

        K = 2.0 * self.max_bid if loss_bound is None else float(loss_bound)
        if K < 2.0 * self.max_bid:
            raise InputError(f"loss bound {K} is below the maximal two-slot revenue {2.0 * self.max_bid}")
        behaviors = BehaviorSpace([p.label for p in self.profiles], behavior_embedding)
        signals = SignalSpace(SIGNAL_LABELS, signal_embedding)
        super().__init__(
            behaviors, signals, users, LossFunction(K, self.gsp_loss), SignalFunction(self.gsp_signal), name=name
        )

    def profile(self, label: str) -> BidProfile:
        try:
            return self._profile_by_label[label]
        except KeyError:
            raise InputError(f"unknown bid profile {label!r}") from None

    def gsp_loss(self, a: ReserveMechanism, b: str, u: UserSample) -> float:
        return -gsp_revenue(a.reserve(u.query), self.profile(b), u.clicks)

    def gsp_signal(self, a: ReserveMechanism, b: str, u: UserSample) -> str:
        profile = self.profile(b)
        shown = shown_count(a.reserve(u.query), profile)
        clicks = sum(u.clicks[:shown])
        return signal_label(shown, clicks)

    def mechanism(self, reserves: Sequence[float]) -> ReserveMechanism:
        mech = ReserveMechanism(self.users.queries, tuple(float(r) for r in reserves))
        if any(r > self.max_bid for r in mech.reserves):
            raise InputError(f"reserves must not exceed the maximal bid {self.max_bid}")
        return mech

    def reserve_space(self, reserve_grid: Sequence[float], name: str = "reserves") -> MechanismSpace:
        """Every assignment of a grid reserve to each query, with the sup-metric."""
        grid = sorted(float(r) for r in reserve_grid)
        members = [self.mechanism(rs) for rs in itertools.product(grid, repeat=len(self.users.queries))]
        return MechanismSpace(members, reserve_distance, name=name)

    def reserve_line(self, low: float, high: float, n: int, name: str = "line") -> MechanismSpace:
        """n mechanisms with the same reserve for every query, evenly spaced in [low, high]."""
        if n < 1:
            raise InputError("grid size must be at least 1")
        values = np.linspace(low, high, n) if n > 1 else np.array([low])
        members = [self.mechanism([v] * len(self.users.queries)) for v in values]
        return MechanismSpace(members, reserve_distance, name=name)

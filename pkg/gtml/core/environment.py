"""
Environment: the spaces plus the loss and signal functions of one game.

Everything downstream works on per-mechanism tables indexed (behavior, user support point),
built once by calling the loss and signal evaluators over the finite product and cached by
mechanism key.
"""
import logging
from typing import Callable, Dict, Optional, Union

import numpy as np

from gtml.core.errors import InputError
from gtml.core.model import LossFunction, SignalFunction
from gtml.core.spaces import BehaviorSpace, SignalSpace, UserDistribution, UserSample

logger = logging.getLogger(__name__)


class Environment:
    def __init__(
        self,
        behaviors: BehaviorSpace,
        signals: SignalSpace,
        users: UserDistribution,
        loss: LossFunction,
        signal: SignalFunction,
        name: str = "env",
    ):
        self.behaviors = behaviors
        self.signals = signals
        self.users = users
        self.loss = loss
        self.signal = signal
        self.name = name
        self._loss_tables: Dict = {}
        self._signal_tables: Dict = {}

    @property
    def K(self) -> float:
        return self.loss.bound

    def loss_table(self, mechanism) -> np.ndarray:
        """L(a, b, u) for every behavior (rows) and user support point (columns)."""
        key = mechanism.key
        table = self._loss_tables.get(key)
        if table is None:
            table = self._build_loss_table(mechanism)
            logger.debug("built loss table for %s in %s", key, self.name)
            table.setflags(write=False)
            self._loss_tables[key] = table
        return table

    def signal_table(self, mechanism) -> np.ndarray:
        """Signal index sig(a, b, u) for every behavior and user support point."""
        key = mechanism.key
        table = self._signal_tables.get(key)
        if table is None:
            table = self._build_signal_table(mechanism)
            table.setflags(write=False)
            self._signal_tables[key] = table
        return table

    def expected_loss(self, mechanism) -> np.ndarray:
        """E_u L(a, b, u) per behavior."""
        return self.loss_table(mechanism) @ self.users.support_probs

    def signal_probs(self, mechanism) -> np.ndarray:
        """q(h | b) = P_u(sig(a, b, u) = h), shape (|B|, |H|)."""
        sig = self.signal_table(mechanism)
        out = np.zeros((self.behaviors.size, self.signals.size))
        rows = np.repeat(np.arange(self.behaviors.size), sig.shape[1])
        weights = np.tile(self.users.support_probs, self.behaviors.size)
        np.add.at(out, (rows, sig.ravel()), weights)
        return out

    def _build_loss_table(self, mechanism) -> np.ndarray:
        support = self.users.support
        return np.array(
            [[self.loss(mechanism, b, u) for u in support] for b in self.behaviors],
            dtype=float,
        )

    def _build_signal_table(self, mechanism) -> np.ndarray:
        support = self.users.support
        table = np.empty((self.behaviors.size, len(support)), dtype=int)
        for bi, b in enumerate(self.behaviors):
            for ui, u in enumerate(support):
                label = self.signal(mechanism, b, u)
                if label not in self.signals:
                    raise InputError(f"signal function returned {label!r}, not a member of the signal space")
                table[bi, ui] = self.signals.index(label)
        return table


TableSource = Union[np.ndarray, Callable[[object], np.ndarray]]


class TabularEnvironment(Environment):
    """
    Environment whose loss and signal are given directly as (|B|, |U|) tables,
    either fixed or computed from the mechanism.
    """

    def __init__(
        self,
        behaviors: BehaviorSpace,
        signals: SignalSpace,
        users: UserDistribution,
        loss_table: TableSource,
        signal_table: Optional[TableSource] = None,
        K: float = 1.0,
        name: str = "tabular",
    ):
        self._loss_source = loss_table
        self._signal_source = signal_table if signal_table is not None else np.zeros(
            (behaviors.size, users.support_size), dtype=int
        )
        loss = LossFunction(K, self._evaluate_loss)
        signal = SignalFunction(self._evaluate_signal)
        super().__init__(behaviors, signals, users, loss, signal, name=name)

    def _resolve(self, source: TableSource, mechanism) -> np.ndarray:
        table = source(mechanism) if callable(source) else source
        table = np.asarray(table)
        expected = (self.behaviors.size, self.users.support_size)
        if table.shape != expected:
            raise InputError(f"table must have shape {expected}, got {table.shape}")
        return table

    def _evaluate_loss(self, mechanism, behavior: str, user: UserSample) -> float:
        table = self._resolve(self._loss_source, mechanism)
        return float(table[self.behaviors.index(behavior), self.users.index_of(user)])

    def _evaluate_signal(self, mechanism, behavior: str, user: UserSample) -> str:
        table = self._resolve(self._signal_source, mechanism)
        return self.signals.label(int(table[self.behaviors.index(behavior), self.users.index_of(user)]))

    def _build_loss_table(self, mechanism) -> np.ndarray:
        return np.array(self._resolve(self._loss_source, mechanism), dtype=float)

    def _build_signal_table(self, mechanism) -> np.ndarray:
        table = np.array(self._resolve(self._signal_source, mechanism), dtype=int)
        if table.min() < 0 or table.max() >= self.signals.size:
            raise InputError("signal table holds indices outside the signal space")
        return table

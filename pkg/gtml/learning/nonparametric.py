"""
Conditional-frequency estimator of the behavior model.
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from gtml.core.errors import InputError
from gtml.core.model import BehaviorModel, Trajectory

logger = logging.getLogger(__name__)

FALLBACKS = ("uniform", "identity")


@dataclass
class FitReport:
    method: str
    log_likelihood_trace: List[float] = field(default_factory=list)
    iterations: int = 0
    grad_norm: float = 0.0
    zero_count_cells: List[Tuple[str, str]] = field(default_factory=list)
    fallback: Optional[str] = None
    renormalized: bool = False
    converged: bool = True
    message: str = ""
    n_transitions: int = 0
    w: Optional[List[float]] = None

    @property
    def log_likelihood(self) -> Optional[float]:
        return self.log_likelihood_trace[-1] if self.log_likelihood_trace else None

    def to_dict(self) -> Dict:
        out = asdict(self)
        out["zero_count_cells"] = [list(cell) for cell in self.zero_count_cells]
        out["log_likelihood"] = self.log_likelihood
        return out


def transition_counts(traj: Trajectory) -> np.ndarray:
    """count(h_t = H_j, b_t = B_i, b_{t+1} = B_k) over t = 1..T-1, shape (|H|, |B|, |B|)."""
    if len(traj) < 2:
        raise InputError("trajectory must contain at least two records to observe a transition")
    n_b, n_h = traj.behavior_space.size, traj.signal_space.size
    counts = np.zeros((n_h, n_b, n_b), dtype=np.int64)
    np.add.at(counts, (traj.signals[:-1], traj.behaviors[:-1], traj.behaviors[1:]), 1)
    return counts


def fit_nonparametric(traj: Trajectory, fallback: str = "uniform") -> Tuple[BehaviorModel, FitReport]:
    """
    M_hat_{H_j}(B_i, B_k) = count(B_i, H_j -> B_k) / count(B_i, H_j).

    Rows never visited get the fallback row: uniform, or a point mass on B_i for "identity".
    """
    if fallback not in FALLBACKS:
        raise InputError(f"unknown fallback {fallback!r}; expected one of {FALLBACKS}")
    counts = transition_counts(traj)
    n_h, n_b, _ = counts.shape
    totals = counts.sum(axis=-1)
    visited = totals > 0

    matrices = np.empty(counts.shape, dtype=float)
    matrices[visited] = counts[visited] / totals[visited][:, None]
    empty_h, empty_b = np.nonzero(~visited)
    if fallback == "uniform":
        matrices[~visited] = 1.0 / n_b
    else:
        matrices[~visited] = 0.0
        matrices[empty_h, empty_b, empty_b] = 1.0

    zero_cells = [(traj.signal_space.label(h), traj.behavior_space.label(b)) for h, b in zip(empty_h, empty_b)]
    logger.debug("frequency fit: %s transitions, %s unvisited rows", int(totals.sum()), len(zero_cells))
    report = FitReport(
        method="nonparametric",
        zero_count_cells=zero_cells,
        fallback=fallback if zero_cells else None,
        n_transitions=int(totals.sum()),
    )
    model = BehaviorModel(traj.behavior_space, traj.signal_space, matrices, name="nonparametric")
    return model, report

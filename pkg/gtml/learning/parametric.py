"""
Truncated-Gaussian behavior family fitted by maximum likelihood.

M_h(b, b') is proportional to exp(-(e(b') - <w, x(b, h)>)^2), normalized over the finite behavior
space, where e(b') is the first column of the behavior embedding and x(b, h) stacks the selected
features: behavior embedding, signal embedding, and a constant 1.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import log_softmax

from gtml.core.errors import InputError
from gtml.core.model import BehaviorModel, Trajectory
from gtml.core.spaces import BehaviorSpace, SignalSpace
from gtml.learning.nonparametric import FitReport, transition_counts

logger = logging.getLogger(__name__)

FEATURES = ("behavior", "signal", "bias")
BOX_TOL = 1e-12


def design_tensor(behaviors: BehaviorSpace, signals: SignalSpace, features: Sequence[str]) -> np.ndarray:
    """x(b, h) for every signal and behavior, shape (|H|, |B|, d)."""
    unknown = [f for f in features if f not in FEATURES]
    if unknown or not features:
        raise InputError(f"features must be a non-empty subset of {FEATURES}, got {list(features)}")
    n_h, n_b = signals.size, behaviors.size
    blocks = []
    for name in FEATURES:
        if name not in features:
            continue
        if name == "behavior":
            emb = behaviors.embedding
            blocks.append(np.broadcast_to(emb[None, :, :], (n_h, n_b, emb.shape[1])))
        elif name == "signal":
            emb = signals.embedding
            blocks.append(np.broadcast_to(emb[:, None, :], (n_h, n_b, emb.shape[1])))
        else:
            blocks.append(np.ones((n_h, n_b, 1)))
    return np.concatenate(blocks, axis=-1)


@dataclass(frozen=True)
class ParametricBehaviorModel:
    behaviors: BehaviorSpace
    signals: SignalSpace
    w: np.ndarray
    W: float
    features: Tuple[str, ...] = FEATURES
    _design: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.W < 0:
            raise InputError("box bound W must be non-negative")
        design = design_tensor(self.behaviors, self.signals, self.features)
        w = np.array(self.w, dtype=float).ravel()
        if w.shape != (design.shape[-1],):
            raise InputError(f"w must have {design.shape[-1]} components for features {list(self.features)}")
        if np.any(np.abs(w) > self.W + BOX_TOL):
            raise InputError(f"|w|_inf = {np.abs(w).max():.6g} exceeds W = {self.W}")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "_design", design)

    @property
    def dim(self) -> int:
        return self._design.shape[-1]

    def means(self, w: Optional[np.ndarray] = None) -> np.ndarray:
        """<w, x(b, h)>, shape (|H|, |B|)."""
        return self._design @ (self.w if w is None else w)

    def log_matrices(self, w: Optional[np.ndarray] = None) -> np.ndarray:
        target = self.behaviors.embedding[:, 0]
        logits = -(target[None, None, :] - self.means(w)[..., None]) ** 2
        return log_softmax(logits, axis=-1)

    def with_w(self, w) -> "ParametricBehaviorModel":
        return ParametricBehaviorModel(self.behaviors, self.signals, np.clip(w, -self.W, self.W), self.W, self.features)


def materialize(pm: ParametricBehaviorModel) -> BehaviorModel:
    return BehaviorModel(pm.behaviors, pm.signals, np.exp(pm.log_matrices()), name="parametric")


def _ll_and_grad(pm: ParametricBehaviorModel, counts: np.ndarray, w: np.ndarray) -> Tuple[float, np.ndarray]:
    log_m = pm.log_matrices(w)
    ll = float((counts * log_m).sum())
    # d log M_h(b, k) / d mu_{h,b} = 2 (e_k - E_{M_h(b, .)}[e])
    target = pm.behaviors.embedding[:, 0]
    expected = np.exp(log_m) @ target
    row_totals = counts.sum(axis=-1)
    d_mu = 2.0 * (counts @ target - row_totals * expected)
    grad = np.einsum("hb,hbd->d", d_mu, pm._design)
    return ll, grad


def log_likelihood(pm: ParametricBehaviorModel, traj: Trajectory) -> float:
    """sum_t log M_{h_t}(b_t, b_{t+1})."""
    return _ll_and_grad(pm, transition_counts(traj), pm.w)[0]


def log_likelihood_gradient(pm: ParametricBehaviorModel, traj: Trajectory) -> np.ndarray:
    return _ll_and_grad(pm, transition_counts(traj), pm.w)[1]


def _projected_grad_norm(w: np.ndarray, grad: np.ndarray, W: float) -> float:
    """Ascent direction norm with components blocked by an active box face zeroed."""
    g = grad.copy()
    g[(w >= W - 1e-9) & (g > 0)] = 0.0
    g[(w <= -W + 1e-9) & (g < 0)] = 0.0
    return float(np.abs(g).max()) if g.size else 0.0


def fit_parametric(
    traj: Trajectory,
    W: float,
    features: Sequence[str] = FEATURES,
    restarts: int = 10,
    grad_tol: float = 1e-6,
    max_iters: int = 500,
    seed: Optional[int] = None,
) -> Tuple[ParametricBehaviorModel, FitReport]:
    """
    Maximize the log-likelihood over the box |w|_inf <= W with L-BFGS-B.

    The first start is w = 0, the rest are uniform in the box; the best final iterate wins.
    Non-convergence is reported in the FitReport, never raised.
    """
    if restarts < 1:
        raise InputError("restarts must be at least 1")
    counts = transition_counts(traj)
    n_obs = int(counts.sum())
    design = design_tensor(traj.behavior_space, traj.signal_space, features)
    pm = ParametricBehaviorModel(traj.behavior_space, traj.signal_space, np.zeros(design.shape[-1]), W, tuple(features))

    if W == 0:
        ll, grad = _ll_and_grad(pm, counts, pm.w)
        report = FitReport(
            method="parametric",
            log_likelihood_trace=[ll],
            grad_norm=_projected_grad_norm(pm.w, grad / n_obs, W),
            message="degenerate box W = 0",
            n_transitions=n_obs,
            w=pm.w.tolist(),
        )
        return pm, report

    rng = np.random.default_rng(seed)
    starts = [np.zeros(pm.dim)] + [rng.uniform(-W, W, size=pm.dim) for _ in range(restarts - 1)]
    bounds = [(-W, W)] * pm.dim

    def objective(w):
        ll, grad = _ll_and_grad(pm, counts, w)
        return -ll / n_obs, -grad / n_obs

    best = None
    for i, w0 in enumerate(starts):
        trace = [_ll_and_grad(pm, counts, w0)[0]]
        res = minimize(
            objective, w0, jac=True, method="L-BFGS-B", bounds=bounds,
            options={"maxiter": max_iters, "gtol": grad_tol},
            callback=lambda wk: trace.append(_ll_and_grad(pm, counts, wk)[0]),
        )
        ll, grad = _ll_and_grad(pm, counts, res.x)
        logger.debug("restart %s: ll=%.6f after %s iterations (%s)", i, ll, res.nit, res.message)
        if best is None or ll > best[0]:
            best = (ll, res, grad, trace)

    ll, res, grad, trace = best
    if trace[-1] != ll:
        trace.append(ll)
    fitted = pm.with_w(res.x)
    gnorm = _projected_grad_norm(fitted.w, grad / n_obs, W)
    converged = bool(res.success) or gnorm <= grad_tol
    if not converged:
        logger.warning("MLE stopped before convergence: %s (projected gradient %.3e)", res.message, gnorm)
    report = FitReport(
        method="parametric",
        log_likelihood_trace=[float(v) for v in trace],
        iterations=int(res.nit),
        grad_norm=gnorm,
        converged=converged,
        message=str(res.message),
        n_transitions=n_obs,
        w=fitted.w.tolist(),
    )
    return fitted, report

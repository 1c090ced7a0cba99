"""
Mechanism-dependent behavior chains.

Simulation, marginal kernels P(b'|b) = sum_u P(u) M_{sig(a,b,u)}(b, b'), stationary
distributions, exact risks, ergodicity certificates and the distances used by the
error decomposition.
"""
import logging
from bisect import bisect_right
from dataclasses import dataclass
from typing import Hashable, List, Optional, Tuple, Union

import numpy as np
from scipy.sparse.csgraph import connected_components

from gtml.core.environment import Environment
from gtml.core.errors import ConvergenceError, InputError, NotErgodicError
from gtml.core.model import STOCHASTIC_TOL, BehaviorModel, Trajectory

logger = logging.getLogger(__name__)

STATIONARY_TOL = 1e-12
STATIONARY_MAX_ITERS = 1_000_000
MAX_AUGMENTED_STATES = 4096

RngLike = Union[None, int, np.random.Generator]


def as_rng(seed: RngLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _check_spaces(model: BehaviorModel, env: Environment):
    if model.behaviors != env.behaviors or model.signals != env.signals:
        raise InputError(f"model {model.name!r} and environment {env.name!r} use different spaces")


def _row_cdfs(matrices: np.ndarray) -> List[List[List[float]]]:
    cdf = np.cumsum(matrices, axis=-1)
    return (cdf / cdf[..., -1:]).tolist()


# === SAMPLING ===

def step(model: BehaviorModel, b: str, h: str, rng: np.random.Generator) -> str:
    """Draw b' ~ M_h(b, .)."""
    bi = model.behaviors.index(b)
    hi = model.signals.index(h)
    nxt = rng.choice(model.behaviors.size, p=model.matrices[hi, bi])
    return model.behaviors.label(int(nxt))


def _run_chain(cdfs, sig_rows, users: List[int], b0: int, draws: List[float]) -> Tuple[np.ndarray, np.ndarray]:
    T = len(users)
    behaviors = np.empty(T, dtype=int)
    signals = np.empty(T, dtype=int)
    b = b0
    for t in range(T):
        h = sig_rows[b][users[t]]
        behaviors[t] = b
        signals[t] = h
        if t + 1 < T:
            b = bisect_right(cdfs[h][b], draws[t])
    return behaviors, signals


def _initial_index(model: BehaviorModel, mechanism, env: Environment, init, rng: np.random.Generator) -> int:
    if init == "stationary":
        pi = stationary_distribution(marginal_kernel(model, mechanism, env)).probs
        return int(rng.choice(model.behaviors.size, p=pi))
    return model.behaviors.index(init)


def simulate_behaviors(
    model: BehaviorModel,
    mechanism,
    env: Environment,
    users: np.ndarray,
    rng: RngLike = None,
    init: str = "stationary",
    burn_in: int = 0,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Behavior and signal index sequences driven by a given user index sequence.

    With burn_in > 0 the chain starts at `init` (or the first behavior when init is
    "stationary"), runs burn_in steps on fresh users, and the kept sequence begins after them.
    Steps invert each row's normalized CDF at one pre-drawn uniform.
    """
    _check_spaces(model, env)
    rng = as_rng(rng)
    users = np.asarray(users, dtype=int)
    if len(users) < 1:
        raise InputError("need at least one user sample")
    cdfs = _row_cdfs(model.matrices)
    sig_rows = env.signal_table(mechanism).tolist()

    if burn_in > 0:
        start = 0 if init == "stationary" else model.behaviors.index(init)
        warm_users = env.users.sample(rng, burn_in + 1).tolist()
        warm, _ = _run_chain(cdfs, sig_rows, warm_users, start, rng.random(burn_in).tolist())
        # one more transition out of the last warm-up state
        h = sig_rows[warm[-1]][warm_users[-1]]
        b0 = int(rng.choice(model.behaviors.size, p=model.matrices[h, warm[-1]]))
    else:
        b0 = _initial_index(model, mechanism, env, init, rng)

    draws = rng.random(len(users) - 1).tolist()
    return _run_chain(cdfs, sig_rows, users.tolist(), b0, draws)


def simulate(
    model: BehaviorModel,
    mechanism,
    env: Environment,
    T: int,
    init: str = "stationary",
    seed: Optional[int] = None,
    burn_in: Optional[int] = None,
    max_N: int = 8,
) -> Trajectory:
    """
    Simulate T records (b_t, h_t, u_t) with u_t i.i.d., h_t = sig(a, b_t, u_t) and
    b_{t+1} ~ M_{h_t}(b_t, .).

    init is "stationary" (b_1 drawn from the stationary distribution of the marginal
    kernel), "burn_in" (start at the first behavior and discard `burn_in` steps, default
    10 * N0 of the marginal certificate searched up to max_N), or a behavior label.
    """
    if T < 1:
        raise InputError("trajectory length T must be at least 1")
    rng = as_rng(seed)
    users = env.users.sample(rng, T)
    if init == "burn_in":
        if burn_in is None:
            cert = ergodicity_certificate(model, env, mechanism, max_N=max_N, chain="marginal")
            burn_in = 10 * cert.N0
        behaviors, signals = simulate_behaviors(model, mechanism, env, users, rng, init="stationary", burn_in=burn_in)
    else:
        behaviors, signals = simulate_behaviors(model, mechanism, env, users, rng, init=init)
    return Trajectory(
        behaviors, signals, users, env.behaviors, env.signals, env.users,
        mechanism_key=mechanism.key, seed=seed if isinstance(seed, int) else None,
    )


# === KERNELS AND STATIONARITY ===

@dataclass(frozen=True)
class MarginalKernel:
    matrix: np.ndarray
    provenance: Tuple[Hashable, str, str] = (None, "", "")


@dataclass(frozen=True)
class StationaryDistribution:
    probs: np.ndarray
    residual: float
    iterations: int = 0


def marginal_kernel(model: BehaviorModel, mechanism, env: Environment) -> MarginalKernel:
    _check_spaces(model, env)
    sig = env.signal_table(mechanism)
    n_b = model.behaviors.size
    # M[sig(b, u), b, :] for every (b, u), weighted by P(u)
    rows = model.matrices[sig, np.arange(n_b)[:, None], :]
    matrix = np.einsum("buk,u->bk", rows, env.users.support_probs)
    matrix = matrix / matrix.sum(axis=1, keepdims=True)
    matrix.setflags(write=False)
    return MarginalKernel(matrix, (mechanism.key, model.name, env.name))


def _as_matrix(kernel) -> np.ndarray:
    matrix = kernel.matrix if isinstance(kernel, MarginalKernel) else np.asarray(kernel, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InputError("kernel must be a square matrix")
    if np.any(matrix < 0) or np.any(np.abs(matrix.sum(axis=1) - 1.0) > STOCHASTIC_TOL):
        raise InputError("kernel must be row-stochastic")
    return matrix


def is_irreducible(matrix: np.ndarray) -> bool:
    n_components, _ = connected_components(matrix > 0, directed=True, connection="strong")
    return n_components == 1


def stationary_distribution(kernel, tol: float = STATIONARY_TOL, max_iters: int = STATIONARY_MAX_ITERS) -> StationaryDistribution:
    """
    Power iteration from the uniform vector until ||pi P - pi||_1 <= tol.

    Raises NotErgodicError for reducible kernels and ConvergenceError (with the last
    residual) when max_iters is exhausted.
    """
    P = _as_matrix(kernel)
    if not is_irreducible(P):
        raise NotErgodicError("kernel is reducible; the stationary distribution is not unique")
    n = P.shape[0]
    pi = np.full(n, 1.0 / n)
    residual = np.inf
    for it in range(1, max_iters + 1):
        nxt = pi @ P
        nxt /= nxt.sum()
        residual = float(np.abs(nxt - pi).sum())
        pi = nxt
        if residual <= tol:
            residual = float(np.abs(pi @ P - pi).sum())
            if residual <= tol:
                logger.debug("power iteration converged in %s iterations (residual %.3e)", it, residual)
                pi.setflags(write=False)
                return StationaryDistribution(pi, residual, it)
    raise ConvergenceError(
        f"power iteration did not reach tol={tol:g} within {max_iters} iterations (residual {residual:.3e})",
        residual=residual,
        iterations=max_iters,
    )


def exact_risk(mechanism, model: BehaviorModel, env: Environment, tol: float = STATIONARY_TOL) -> float:
    """R(a, M) = sum_b pi_b(b) sum_u P(u) L(a, b, u), using pi(a, M) = pi_b x P_U."""
    pi = stationary_distribution(marginal_kernel(model, mechanism, env), tol=tol).probs
    return float(pi @ env.expected_loss(mechanism))


# === ERGODICITY ===

@dataclass(frozen=True)
class ErgodicityCertificate:
    N0: int
    delta0: float
    chain: str
    n_states: int


def augmented_kernel(model: BehaviorModel, env: Environment, mechanism, max_states: int = MAX_AUGMENTED_STATES):
    """
    Transition matrix of x_t = (b_{t+1}, b_t, h_t) over reachable triples.

    (b2, b1, h1) -> (b3, b2, h2) with probability q(h2 | b2) M_{h2}(b2, b3).
    Returns (matrix, states) with states as (b_next, b, h) index triples.
    """
    _check_spaces(model, env)
    q = env.signal_probs(mechanism)
    M = model.matrices
    states = [
        (b2, b1, h1)
        for b1 in range(model.behaviors.size)
        for h1 in np.flatnonzero(q[b1] > 0)
        for b2 in np.flatnonzero(M[h1, b1] > 0)
    ]
    if len(states) > max_states:
        raise InputError(f"augmented chain has {len(states)} states, above the limit of {max_states}")
    index = {s: i for i, s in enumerate(states)}
    P = np.zeros((len(states), len(states)))
    for i, (b2, _, _) in enumerate(states):
        for h2 in np.flatnonzero(q[b2] > 0):
            for b3 in np.flatnonzero(M[h2, b2] > 0):
                P[i, index[(b3, b2, h2)]] += q[b2, h2] * M[h2, b2, b3]
    return P, states


def ergodicity_certificate(
    model: BehaviorModel,
    env: Environment,
    mechanism,
    max_N: int,
    chain: str = "augmented",
) -> ErgodicityCertificate:
    """
    Smallest N0 <= max_N whose N0-step matrix is all-positive, with delta0 its minimum entry.

    chain="augmented" works on (b_{t+1}, b_t, h_t); chain="marginal" on the behavior chain.
    """
    if max_N < 1:
        raise InputError("max_N must be at least 1")
    if chain == "augmented":
        P, _ = augmented_kernel(model, env, mechanism)
    elif chain == "marginal":
        P = np.asarray(marginal_kernel(model, mechanism, env).matrix)
    else:
        raise InputError(f"unknown chain {chain!r}; expected 'augmented' or 'marginal'")

    power = P.copy()
    for n in range(1, max_N + 1):
        if n > 1:
            power = power @ P
        smallest = float(power.min())
        if smallest > 0:
            return ErgodicityCertificate(n, smallest, chain, P.shape[0])
    raise NotErgodicError(f"no all-positive {chain} transition power up to N={max_N}")


def reachable_rows(mechanism, env: Environment) -> np.ndarray:
    """(|H|, |B|) mask of rows (h, b) with q(h | b) > 0 under the mechanism."""
    return env.signal_probs(mechanism).T > 0


# === DISTANCES ===

def model_inf_distance(m1: BehaviorModel, m2: BehaviorModel, rows: Optional[np.ndarray] = None) -> float:
    """max over (h, b) of sum_b' |m1_h(b, b') - m2_h(b, b')|, optionally over a row mask."""
    if not m1.same_spaces(m2):
        raise InputError("models are defined over different spaces")
    row_l1 = np.abs(m1.matrices - m2.matrices).sum(axis=-1)
    if rows is not None:
        rows = np.asarray(rows, dtype=bool)
        if rows.shape != row_l1.shape:
            raise InputError(f"row mask must have shape {row_l1.shape}")
        if not rows.any():
            return 0.0
        row_l1 = row_l1[rows]
    return float(row_l1.max())


def tv_distance(p, q) -> float:
    p = p.probs if isinstance(p, StationaryDistribution) else np.asarray(p, dtype=float)
    q = q.probs if isinstance(q, StationaryDistribution) else np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise InputError("distributions must have the same length")
    return float(0.5 * np.abs(p - q).sum())

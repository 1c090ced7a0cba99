"""
Experiment commands.

Each `*_frame` function is pure: config in, pandas DataFrame out. The cmd_* wrappers write the
results under an output directory. Replication seeds come from task_int_seed(config.seed, ...),
so output does not depend on `jobs`.
"""
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from gtml.auction.builders import build_environment, build_true_model, logging_mechanism, reserve_space
from gtml.auction.gsp import GspEnvironment
from gtml.auction.models import make_signal_independent_model, make_true_model
from gtml.bounds.covers import cover
from gtml.bounds.decomposition import decomposition_check
from gtml.bounds.estimates import lipschitz_estimate, stability_constant_estimate
from gtml.bounds.formulas import (
    MixingParameters,
    PdimCoveringProvider,
    behavior_bound_nonparametric,
    behavior_bound_parametric,
    dominant_log_term,
    split_eps,
    total_bound,
    uniform_bound,
)
from gtml.config.settings import GtmlConfig
from gtml.core.errors import DomainError, NumericalError
from gtml.core.model import BehaviorModel, MechanismSpace, Trajectory
from gtml.core.spaces import UserDistribution
from gtml.data.files import read_trajectory, write_model, write_table, write_trajectory
from gtml.experiments.batch import run_batched
from gtml.learning.nonparametric import FitReport, fit_nonparametric
from gtml.learning.parametric import fit_parametric, materialize
from gtml.markov.engine import (
    ErgodicityCertificate,
    ergodicity_certificate,
    model_inf_distance,
    reachable_rows,
    simulate,
)
from gtml.mechanism.erm import erm_search, exact_risk_table, sup_deviation
from gtml.utils.seeding import task_int_seed, task_rng

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass
class ExperimentContext:
    config: GtmlConfig
    env: GspEnvironment
    true_model: BehaviorModel
    logging_mechanism: object
    space: MechanismSpace


def build_context(config: GtmlConfig) -> ExperimentContext:
    env = build_environment(config)
    return ExperimentContext(
        config=config,
        env=env,
        true_model=build_true_model(config, env),
        logging_mechanism=logging_mechanism(config, env),
        space=reserve_space(config, env),
    )


def simulate_logged(ctx: ExperimentContext, T: int, seed: Optional[int], model: Optional[BehaviorModel] = None) -> Trajectory:
    markov = ctx.config.markov
    return simulate(
        model or ctx.true_model, ctx.logging_mechanism, ctx.env, T,
        init=markov.init, seed=seed, burn_in=markov.burn_in, max_N=markov.max_N,
    )


def fit_behavior_model(traj: Trajectory, config: GtmlConfig, seed: Optional[int] = None, method: Optional[str] = None) -> Tuple[BehaviorModel, FitReport]:
    bl = config.behavior_learning
    method = method or bl.method
    if method == "parametric":
        pm, report = fit_parametric(
            traj, bl.W, bl.features, bl.restarts, bl.grad_tol, bl.max_iters, seed=seed,
        )
        return materialize(pm), report
    return fit_nonparametric(traj, bl.fallback)


def sharing_radius(config: GtmlConfig) -> float:
    return config.mechanism_learning.tv_radius if config.mechanism_learning.rule == "tv" else config.delta


def _median(values) -> float:
    values = [v for v in values if not (isinstance(v, float) and math.isnan(v))]
    return float(np.median(values)) if values else math.nan


# === SIMULATE / FIT ===

def cmd_simulate(config: GtmlConfig, out_dir: PathLike) -> Path:
    ctx = build_context(config)
    traj = simulate_logged(ctx, config.experiment.simulate_T, config.seed)
    path = write_trajectory(traj, Path(out_dir) / "trajectory.csv")
    logger.info("simulated %s records under %s", len(traj), ctx.logging_mechanism.key)
    return path


def cmd_fit_behavior(config: GtmlConfig, trajectory_path: PathLike, out_dir: PathLike) -> Tuple[Path, Path]:
    env = build_environment(config)
    traj = read_trajectory(trajectory_path, env)
    model, report = fit_behavior_model(traj, config, seed=config.seed)
    out = Path(out_dir)
    model_path = write_model(model, out / f"model_{report.method}.csv")
    report_path = out / f"fit_report_{report.method}.json"
    with open(report_path, "w", encoding="utf-8") as f:
        json.dump(report.to_dict(), f, indent=2)
    logger.info("fitted %s model from %s transitions", report.method, report.n_transitions)
    return model_path, report_path


# === BEHAVIOR CONVERGENCE ===

BEHAVIOR_COLUMNS = [
    "kind", "method", "T1", "seed", "inf_distance_error", "full_inf_distance_error",
    "median_error", "tail_frequency",
]


def behavior_convergence_frame(config: GtmlConfig) -> pd.DataFrame:
    """
    One row per (T1, seed) plus one summary row per T1.

    inf_distance_error is measured on the rows reachable under the logging mechanism;
    full_inf_distance_error on every row.
    """
    ctx = build_context(config)
    exp = config.experiment
    mask = reachable_rows(ctx.logging_mechanism, ctx.env)
    tasks = [(T1, s) for T1 in exp.T1 for s in exp.seeds]

    def replicate(task):
        T1, s = task
        seed = task_int_seed(config.seed, s, T1)
        traj = simulate_logged(ctx, T1, seed)
        fitted, _ = fit_behavior_model(traj, config, seed=seed, method=exp.method)
        return (
            model_inf_distance(fitted, ctx.true_model, rows=mask),
            model_inf_distance(fitted, ctx.true_model),
        )

    results = run_batched(replicate, tasks, exp.jobs)
    rows = [
        {"kind": "run", "method": exp.method, "T1": T1, "seed": s, "inf_distance_error": err, "full_inf_distance_error": full}
        for (T1, s), (err, full) in zip(tasks, results)
    ]
    for T1 in exp.T1:
        errors = [r["inf_distance_error"] for r in rows if r["T1"] == T1]
        rows.append({
            "kind": "summary", "method": exp.method, "T1": T1,
            "median_error": _median(errors),
            "tail_frequency": float(np.mean([e >= exp.eps for e in errors])),
        })
    return pd.DataFrame(rows, columns=BEHAVIOR_COLUMNS)


# === MECHANISM CONVERGENCE ===

MECHANISM_COLUMNS = ["T2", "seed", "sup_deviation", "cache_sequences", "cache_hits"]


def mechanism_convergence_frame(config: GtmlConfig, model: Optional[BehaviorModel] = None) -> pd.DataFrame:
    """sup_a |R_T2(a, M, delta) - R(a, M)| over the reserve grid, with exact risks under M."""
    ctx = build_context(config)
    exp = config.experiment
    model = model or ctx.true_model
    exact = exact_risk_table(ctx.space, model, ctx.env)
    radius, rule = sharing_radius(config), config.mechanism_learning.rule
    tasks = [(T2, s) for T2 in exp.T2 for s in exp.seeds]

    def replicate(task):
        T2, s = task
        seed = task_int_seed(config.seed, s, T2)
        users = ctx.env.users.sample(task_rng(seed, 0), T2)
        result = erm_search(ctx.space, model, ctx.env, users, radius, rule, seed)
        return sup_deviation(result, exact), result.generated, result.hits

    results = run_batched(replicate, tasks, exp.jobs)
    rows = [
        {"T2": T2, "seed": s, "sup_deviation": dev, "cache_sequences": gen, "cache_hits": hits}
        for (T2, s), (dev, gen, hits) in zip(tasks, results)
    ]
    return pd.DataFrame(rows, columns=MECHANISM_COLUMNS)


# === SHARING ABLATION ===

ABLATION_COLUMNS = ["n", "sharing", "T2", "seed", "sup_deviation", "cache_sequences"]


def ablation_environment(config: GtmlConfig) -> GspEnvironment:
    """The configured game, or its single-user variant U = {u} with one query and both slots clicked."""
    if not config.experiment.single_user:
        return build_environment(config)
    query = config.auction.queries[0].name
    return GspEnvironment(
        config.auction.bid_grid,
        config.auction.advertisers,
        UserDistribution.single(query, (1, 1)),
        loss_bound=config.K,
        behavior_embedding=config.spaces.behavior_embedding,
        signal_embedding=config.spaces.signal_embedding,
        name=f"{config.experiment.name}-single-user",
    )


def sharing_ablation_frame(config: GtmlConfig) -> pd.DataFrame:
    """
    Signal-independent model, reserve lines of n mechanisms on [0, max bid], with delta-sharing
    on and off. With sharing off every mechanism simulates its own behavior sequence.
    """
    exp = config.experiment
    env = ablation_environment(config)
    model = make_signal_independent_model(env.behaviors, env.signals, config.true_model.floor, config.true_model.seed)
    delta = config.delta
    lines = {n: env.reserve_line(0.0, env.max_bid, n) for n in exp.grid_sizes}
    exact = {n: exact_risk_table(space, model, env) for n, space in lines.items()}
    tasks = [(n, sharing, T2, s) for n in exp.grid_sizes for sharing in ("on", "off") for T2 in exp.T2 for s in exp.seeds]

    def replicate(task):
        n, sharing, T2, s = task
        seed = task_int_seed(config.seed, s, T2)
        users = env.users.sample(task_rng(seed, 0), T2)
        rule = "d_A" if sharing == "on" else None
        result = erm_search(lines[n], model, env, users, delta if sharing == "on" else 0.0, rule, seed)
        return sup_deviation(result, exact[n]), result.generated

    results = run_batched(replicate, tasks, exp.jobs)
    rows = [
        {"n": n, "sharing": sharing, "T2": T2, "seed": s, "sup_deviation": dev, "cache_sequences": gen}
        for (n, sharing, T2, s), (dev, gen) in zip(tasks, results)
    ]
    return pd.DataFrame(rows, columns=ABLATION_COLUMNS)


# === BOUNDS ===

@dataclass(frozen=True)
class BoundInputs:
    params: MixingParameters
    cert: ErgodicityCertificate
    C_M: float
    cover_size: int
    n_b: int
    n_h: int
    delta: float


def bound_inputs(ctx: ExperimentContext) -> BoundInputs:
    """Mixing parameters from the config; alpha and C(M*) estimated when not configured."""
    config, b = ctx.config, ctx.config.bounds
    alpha = b.alpha
    if alpha is None:
        alpha = lipschitz_estimate(ctx.space, ctx.true_model, ctx.env).alpha if len(ctx.space) > 1 else 0.0
    C_M = b.C_M
    if C_M is None:
        C_M = stability_constant_estimate(
            ctx.true_model, ctx.env, ctx.logging_mechanism, b.perturbations, b.magnitude, config.seed,
        ).C_hat
    params = MixingParameters(beta0=b.beta0, gamma=b.gamma, s=b.s, alpha=alpha, K=config.K, C1=b.C1, C2=b.C2)
    cert = ergodicity_certificate(ctx.true_model, ctx.env, ctx.logging_mechanism, config.markov.max_N)
    delta = config.delta
    return BoundInputs(params, cert, C_M, cover(ctx.space, delta).cardinality, ctx.env.behaviors.size, ctx.env.signals.size, delta)


def _guarded(fn, *args) -> Tuple[float, float, Optional[float]]:
    """(value, log_raw, violated threshold) with NaN values outside the formula's domain."""
    try:
        bv = fn(*args)
        return bv.value, bv.log_raw, None
    except DomainError as e:
        return math.nan, math.nan, e.threshold


BOUND_COLUMNS = ["bound", "T", "eps", "bound_value", "log_raw", "domain_threshold", "empirical_tail_estimate"]


def bounds_frame(config: GtmlConfig, tails: Optional[Dict[int, float]] = None) -> pd.DataFrame:
    """
    Bound curves over the T1 and T2 sweeps at the configured eps.

    `tails` maps T1 to an empirical tail frequency to overlay on the behavior-bound rows.
    """
    ctx = build_context(config)
    exp, b = config.experiment, config.bounds
    inp = bound_inputs(ctx)
    provider = PdimCoveringProvider(config.K, inp.n_b, b.pdim)
    tails = tails or {}
    rows = []

    def add(name, T, eps, guarded, tail=math.nan):
        value, log_raw, threshold = guarded
        rows.append({
            "bound": name, "T": T, "eps": eps, "bound_value": value, "log_raw": log_raw,
            "domain_threshold": threshold, "empirical_tail_estimate": tail,
        })

    for T1 in exp.T1:
        tail = tails.get(T1, math.nan)
        add("behavior_parametric", T1, exp.eps, _guarded(behavior_bound_parametric, T1, exp.eps, inp.params, inp.n_b, inp.n_h, inp.cert), tail)
        add("behavior_nonparametric", T1, exp.eps, _guarded(behavior_bound_nonparametric, T1, exp.eps, inp.params, inp.n_b, inp.n_h, inp.cert), tail)
    for T2 in exp.T2:
        add("uniform", T2, exp.eps, _guarded(uniform_bound, T2, exp.eps, inp.delta, inp.params, inp.cover_size, provider))
        margin = exp.eps - config.K * inp.params.alpha * inp.delta
        if margin > 0:
            log_dom = dominant_log_term(T2, b.pdim, inp.n_b, b.s, config.K, margin / 16, margin ** 2 / (128 * config.K ** 2))
            rows.append({
                "bound": "dominant_log_term", "T": T2, "eps": exp.eps, "bound_value": math.nan,
                "log_raw": log_dom, "domain_threshold": None, "empirical_tail_estimate": math.nan,
            })
    for T1, T2 in zip(exp.T1, exp.T2):
        try:
            tb = total_bound(
                T1, T2, exp.eps, inp.params, inp.n_b, inp.n_h, inp.cert, inp.delta, inp.cover_size, provider,
                C_M=inp.C_M, split=b.eps_split, method=exp.method,
            )
            raw = tb.behavior.raw + tb.mechanism.raw
            add("total", T2, exp.eps, (tb.value, math.log(raw) if raw > 0 else -math.inf, None))
        except DomainError as e:
            add("total", T2, exp.eps, (math.nan, math.nan, e.threshold))
    return pd.DataFrame(rows, columns=BOUND_COLUMNS)


# === END TO END ===

END_TO_END_COLUMNS = [
    "T1", "T2", "seed", "model_error", "learned", "optimum", "gap",
    "behavior_bound", "total_bound",
]


def end_to_end_frame(config: GtmlConfig) -> Tuple[pd.DataFrame, Dict]:
    """
    Fit M_hat from T1 logged records, run ERM with T2 shared users, and report the exact gap
    R(a_hat, M*) - R(a*, M*) along the diagonal (T1, T2) sweep.
    """
    ctx = build_context(config)
    exp = config.experiment
    exact_star = exact_risk_table(ctx.space, ctx.true_model, ctx.env)
    optimum = min(sorted(exact_star), key=lambda k: exact_star[k])
    radius, rule = sharing_radius(config), config.mechanism_learning.rule
    inp = bound_inputs(ctx)
    provider = PdimCoveringProvider(config.K, inp.n_b, config.bounds.pdim)
    behavior_fn = behavior_bound_parametric if exp.method == "parametric" else behavior_bound_nonparametric
    pairs = list(zip(exp.T1, exp.T2))
    tasks = [(T1, T2, s) for T1, T2 in pairs for s in exp.seeds]

    def replicate(task):
        T1, T2, s = task
        seed = task_int_seed(config.seed, s, T1, T2)
        traj = simulate_logged(ctx, T1, seed)
        fitted, _ = fit_behavior_model(traj, config, seed=seed, method=exp.method)
        users = ctx.env.users.sample(task_rng(seed, 0), T2)
        result = erm_search(ctx.space, fitted, ctx.env, users, radius, rule, seed)
        return model_inf_distance(fitted, ctx.true_model), result.best.key

    results = run_batched(replicate, tasks, exp.jobs)
    eps1, _ = split_eps(exp.eps, config.K, inp.C_M, config.bounds.eps_split)
    rows = []
    for (T1, T2, s), (err, learned) in zip(tasks, results):
        b_val = _guarded(behavior_fn, T1, eps1, inp.params, inp.n_b, inp.n_h, inp.cert)[0] if math.isfinite(eps1) else 0.0
        try:
            t_val = total_bound(
                T1, T2, exp.eps, inp.params, inp.n_b, inp.n_h, inp.cert, inp.delta, inp.cover_size, provider,
                C_M=inp.C_M, split=config.bounds.eps_split, method=exp.method,
            ).value
        except DomainError:
            t_val = math.nan
        rows.append({
            "T1": T1, "T2": T2, "seed": s, "model_error": err,
            "learned": ":".join(f"{r:g}" for r in learned), "optimum": ":".join(f"{r:g}" for r in optimum),
            "gap": exact_star[learned] - exact_star[optimum],
            "behavior_bound": b_val, "total_bound": t_val,
        })
    df = pd.DataFrame(rows, columns=END_TO_END_COLUMNS)
    summary = {
        "experiment": exp.name,
        "optimum": list(optimum),
        "optimal_risk": exact_star[optimum],
        "median_gap": {f"{T1}x{T2}": _median(df[(df.T1 == T1) & (df.T2 == T2)].gap) for T1, T2 in pairs},
        "alpha": inp.params.alpha,
        "C_M": inp.C_M,
        "N0": inp.cert.N0,
        "delta0": inp.cert.delta0,
    }
    return df, summary


# === DECOMPOSITION ===

DECOMPOSITION_COLUMNS = ["seed", "lhs", "behavior_term", "mechanism_term", "rhs", "holds", "C_hat", "model_distance"]


def decomposition_frame(config: GtmlConfig) -> pd.DataFrame:
    """Error decomposition on randomized true models, one per seed."""
    env = build_environment(config)
    exp = config.experiment
    space = reserve_space(config, env)
    a0 = logging_mechanism(config, env)
    T1, T2 = exp.T1[0], exp.T2[0]

    def replicate(s):
        seed = task_int_seed(config.seed, s)
        Mstar = make_true_model(env.behaviors, env.signals, config.true_model.floor, seed)
        traj = simulate(
            Mstar, a0, env, T1, init=config.markov.init, seed=seed, burn_in=config.markov.burn_in, max_N=config.markov.max_N,
        )
        fitted, _ = fit_behavior_model(traj, config, seed=seed, method=exp.method)
        users = env.users.sample(task_rng(seed, 0), T2)
        try:
            return decomposition_check(
                Mstar, fitted, space, env, users, config.delta, seed,
                rule="d_A", n_perturbations=config.bounds.perturbations, magnitude=config.bounds.magnitude,
            )
        except NumericalError as e:
            # a short trajectory can leave M_hat reducible under some reserve
            logger.warning("decomposition seed %s skipped: %s", s, e)
            return None

    reports = run_batched(replicate, exp.seeds, exp.jobs)
    rows = [
        {
            "seed": s, "lhs": r.lhs, "behavior_term": r.behavior_term, "mechanism_term": r.mechanism_term,
            "rhs": r.rhs, "holds": r.holds, "C_hat": r.C_hat, "model_distance": r.model_distance,
        }
        if r is not None else {"seed": s, "holds": False}
        for s, r in zip(exp.seeds, reports)
    ]
    return pd.DataFrame(rows, columns=DECOMPOSITION_COLUMNS)


# === WRITERS ===

def cmd_behavior_convergence(config: GtmlConfig, out_dir: PathLike) -> Path:
    return write_table(behavior_convergence_frame(config), Path(out_dir) / "behavior_convergence.csv")


def cmd_mechanism_convergence(config: GtmlConfig, out_dir: PathLike) -> Path:
    return write_table(mechanism_convergence_frame(config), Path(out_dir) / "mechanism_convergence.csv")


def cmd_sharing_ablation(config: GtmlConfig, out_dir: PathLike) -> Path:
    return write_table(sharing_ablation_frame(config), Path(out_dir) / "sharing_ablation.csv")


def cmd_end_to_end(config: GtmlConfig, out_dir: PathLike) -> Tuple[Path, Path]:
    df, summary = end_to_end_frame(config)
    csv_path = write_table(df, Path(out_dir) / "end_to_end.csv")
    json_path = Path(out_dir) / "end_to_end_summary.json"
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    return csv_path, json_path


def cmd_bounds(config: GtmlConfig, out_dir: PathLike, with_tails: bool = False) -> Path:
    tails = None
    if with_tails:
        summary = behavior_convergence_frame(config).query("kind == 'summary'")
        tails = dict(zip(summary.T1.astype(int), summary.tail_frequency))
    return write_table(bounds_frame(config, tails), Path(out_dir) / "bounds.csv")


def cmd_decomposition(config: GtmlConfig, out_dir: PathLike) -> Path:
    return write_table(decomposition_frame(config), Path(out_dir) / "decomposition.csv")

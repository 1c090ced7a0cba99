"""Monte-Carlo checks on the default desk game. Deselect with -m 'not slow'."""
import numpy as np
import pytest

from gtml.core import BehaviorSpace, ParameterMechanism, SignalSpace, TabularEnvironment, UserDistribution
from gtml.experiments import (
    behavior_convergence_frame,
    decomposition_frame,
    end_to_end_frame,
    mechanism_convergence_frame,
    sharing_ablation_frame,
)
from gtml.learning import ParametricBehaviorModel, fit_parametric, log_likelihood, materialize
from gtml.markov import simulate


def _with_experiment(config, **update):
    return config.model_copy(update={"experiment": config.experiment.model_copy(update=update)})


def _single_signal_env(behaviors, signals, users):
    return TabularEnvironment(behaviors, signals, users, np.zeros((behaviors.size, users.support_size)))


def _strictly_decreasing(values):
    return all(later < earlier for earlier, later in zip(values, values[1:]))


@pytest.mark.slow
class TestBehaviorLearning:
    def test_nonparametric_error_shrinks_with_T1(self, desk_config):
        df = behavior_convergence_frame(desk_config)
        summary = df[df.kind == "summary"].set_index("T1").median_error
        assert list(summary.index) == [1_000, 10_000, 100_000]
        assert summary[1_000] <= 0.30
        assert summary[10_000] <= 0.10
        assert summary[100_000] <= 0.04
        assert _strictly_decreasing(summary.tolist())

    def test_parametric_recovers_generating_weights(self, toy_env):
        w_star = np.array([0.8, -0.3])
        truth = materialize(ParametricBehaviorModel(toy_env.behaviors, toy_env.signals, w_star, 2.0, ("behavior", "bias")))
        errors = []
        for seed in range(20):
            traj = simulate(truth, ParameterMechanism((0.5,)), toy_env, 100_000, seed=seed)
            pm, _ = fit_parametric(traj, W=2.0, features=["behavior", "bias"], restarts=3, seed=seed)
            errors.append(np.abs(pm.w - w_star).max())
        assert np.median(errors) <= 0.1

    def test_one_dimensional_fit_matches_grid_scan(self):
        behaviors, signals = BehaviorSpace(["lo", "mid", "hi"]), SignalSpace(["h"])
        users = UserDistribution.single("q")
        truth = materialize(ParametricBehaviorModel(behaviors, signals, [0.35], 2.0, ("bias",)))
        traj = simulate(truth, ParameterMechanism((0.0,)), _single_signal_env(behaviors, signals, users), 2_000, seed=4)
        pm, _ = fit_parametric(traj, W=2.0, features=["bias"], restarts=3, seed=4)

        base = ParametricBehaviorModel(behaviors, signals, [0.0], 2.0, ("bias",))
        grid = np.arange(-2.0, 2.0 + 1e-9, 1e-3)
        scan = [log_likelihood(base.with_w([w]), traj) for w in grid]
        assert abs(pm.w[0] - grid[int(np.argmax(scan))]) <= 2e-3


@pytest.mark.slow
class TestMechanismLearning:
    def test_sup_deviation_shrinks_on_reserve_grid(self, desk_config):
        df = mechanism_convergence_frame(desk_config)
        medians = df.groupby("T2").sup_deviation.median()
        assert list(medians.index) == [100, 1_000, 10_000]
        assert _strictly_decreasing(medians.tolist())
        assert medians[10_000] <= 0.05 * desk_config.K

    def test_sharing_ablation(self, desk_config):
        config = _with_experiment(desk_config, grid_sizes=[5, 500], T2=[1_000], seeds=list(range(50)))
        df = sharing_ablation_frame(config)
        medians = df.groupby(["sharing", "n"]).sup_deviation.median()
        assert medians["off", 500] >= 1.25 * medians["off", 5]
        assert abs(medians["on", 500] - medians["on", 5]) < 0.10 * medians["on", 5]


@pytest.mark.slow
class TestEndToEnd:
    def test_decomposition_holds_on_random_models(self, desk_config):
        df = decomposition_frame(_with_experiment(desk_config, seeds=list(range(100))))
        assert len(df) == 100
        assert df.holds.astype(bool).mean() >= 0.95

    def test_generalization_gap_shrinks(self, desk_config):
        df, summary = end_to_end_frame(desk_config)
        medians = list(summary["median_gap"].values())
        assert list(summary["median_gap"]) == ["1000x100", "10000x1000", "100000x10000"]
        assert all(later <= earlier for earlier, later in zip(medians, medians[1:]))
        assert medians[-1] <= 0.05 * desk_config.K
        assert (df.gap >= -1e-12).all()

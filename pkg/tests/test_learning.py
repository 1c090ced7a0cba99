import numpy as np
import pytest

from gtml.core import BehaviorSpace, InputError, ParameterMechanism, SignalSpace, Trajectory, UserDistribution, validate_model
from gtml.learning import (
    ParametricBehaviorModel,
    fit_nonparametric,
    fit_parametric,
    log_likelihood,
    log_likelihood_gradient,
    materialize,
    transition_counts,
)
from gtml.markov import model_inf_distance, reachable_rows, simulate

A = ParameterMechanism((0.5,))


def _trajectory(env, behaviors, signals=None):
    behaviors = np.asarray(behaviors)
    signals = np.zeros_like(behaviors) if signals is None else np.asarray(signals)
    return Trajectory(behaviors, signals, np.zeros_like(behaviors), env.behaviors, env.signals, env.users)


class TestTransitionCounts:
    def test_needs_two_records(self, toy_env):
        with pytest.raises(InputError):
            transition_counts(_trajectory(toy_env, [0]))

    def test_counts_signal_and_behavior(self, toy_env):
        counts = transition_counts(_trajectory(toy_env, [0, 1, 1, 0], [0, 1, 1, 0]))
        assert counts[0, 0, 1] == 1
        assert counts[1, 1, 1] == 1
        assert counts[1, 1, 0] == 1
        assert counts.sum() == 3


class TestNonparametric:
    def test_single_transition(self, toy_env):
        model, report = fit_nonparametric(_trajectory(toy_env, [0, 1]))
        np.testing.assert_allclose(model.matrices[0, 0], [0.0, 1.0])
        np.testing.assert_allclose(model.matrices[0, 1], [0.5, 0.5])
        np.testing.assert_allclose(model.matrices[1], 0.5)
        assert report.fallback == "uniform"
        assert ("h1", "b0") in report.zero_count_cells
        assert len(report.zero_count_cells) == 3
        assert report.n_transitions == 1

    def test_hand_counted_row(self, toy_env):
        model, report = fit_nonparametric(_trajectory(toy_env, [0, 0, 0, 0, 1]))
        np.testing.assert_allclose(model.matrices[0, 0], [0.75, 0.25])
        assert validate_model(model) == []

    def test_identity_fallback(self, toy_env):
        model, report = fit_nonparametric(_trajectory(toy_env, [0, 1]), fallback="identity")
        np.testing.assert_allclose(model.matrices[1], np.eye(2))
        assert report.fallback == "identity"

    def test_fully_visited_has_no_fallback(self, toy_env):
        _, report = fit_nonparametric(_trajectory(toy_env, [0, 0, 1, 1, 0], [0, 0, 1, 1, 0]))
        assert report.zero_count_cells == [("h0", "b1"), ("h1", "b0")]
        _, report = fit_nonparametric(_trajectory(toy_env, [0, 1, 0, 1, 0], [0, 1, 1, 0, 0]))
        assert report.zero_count_cells == []
        assert report.fallback is None

    def test_unknown_fallback(self, toy_env):
        with pytest.raises(InputError):
            fit_nonparametric(_trajectory(toy_env, [0, 1]), fallback="random")

    def test_consistency(self, toy_model, toy_env):
        traj = simulate(toy_model, A, toy_env, 100_000, seed=21)
        fitted, _ = fit_nonparametric(traj)
        assert model_inf_distance(fitted, toy_model, rows=reachable_rows(A, toy_env)) <= 0.05


class TestParametricFamily:
    def test_zero_weights_two_levels(self, toy_env):
        pm = ParametricBehaviorModel(toy_env.behaviors, toy_env.signals, [0.0], 1.0, ("bias",))
        expected = np.array([1.0, np.exp(-1.0)]) / (1.0 + np.exp(-1.0))
        np.testing.assert_allclose(materialize(pm).matrices[0, 0], expected)
        np.testing.assert_allclose(expected, [0.7311, 0.2689], atol=1e-4)

    def test_row_is_softmax_of_negative_squared_residual(self):
        behaviors = BehaviorSpace(["lo", "mid", "hi"], embedding=[0.0, 1.0, 2.0])
        pm = ParametricBehaviorModel(behaviors, SignalSpace(["h"]), [0.5], 1.0, ("bias",))
        logits = -(np.array([0.0, 1.0, 2.0]) - 0.5) ** 2
        expected = np.exp(logits) / np.exp(logits).sum()
        np.testing.assert_allclose(materialize(pm).matrices[0, 1], expected, rtol=1e-12)
        np.testing.assert_allclose(expected[2] / expected[0], np.exp(-2.0), rtol=1e-12)

    def test_equal_embeddings_give_uniform_rows(self):
        behaviors = BehaviorSpace(["x", "y", "z"], embedding=[0.5, 0.5, 0.5])
        pm = ParametricBehaviorModel(behaviors, SignalSpace(["h"]), [0.3, -1.0, 0.7], 1.0)
        np.testing.assert_allclose(materialize(pm).matrices, 1 / 3)

    def test_materialized_model_is_valid(self, toy_env):
        pm = ParametricBehaviorModel(toy_env.behaviors, toy_env.signals, [1.5, -0.5, 0.2], 2.0)
        assert validate_model(materialize(pm)) == []

    def test_box_enforced(self, toy_env):
        with pytest.raises(InputError):
            ParametricBehaviorModel(toy_env.behaviors, toy_env.signals, [2.5, 0.0, 0.0], 2.0)

    def test_feature_subset_checked(self, toy_env):
        with pytest.raises(InputError):
            ParametricBehaviorModel(toy_env.behaviors, toy_env.signals, [0.0], 1.0, ("price",))
        with pytest.raises(InputError):
            ParametricBehaviorModel(toy_env.behaviors, toy_env.signals, [0.0, 0.0], 1.0, ("bias",))

    def test_gradient_matches_finite_differences(self, toy_model, toy_env):
        traj = simulate(toy_model, A, toy_env, 200, seed=3)
        pm = ParametricBehaviorModel(toy_env.behaviors, toy_env.signals, [0.4, -0.2, 0.1], 2.0)
        grad = log_likelihood_gradient(pm, traj)
        h = 1e-6
        numeric = []
        for i in range(pm.dim):
            step = np.zeros(pm.dim)
            step[i] = h
            numeric.append((log_likelihood(pm.with_w(pm.w + step), traj) - log_likelihood(pm.with_w(pm.w - step), traj)) / (2 * h))
        np.testing.assert_allclose(grad, numeric, rtol=1e-5, atol=1e-4)


class TestParametricFit:
    def test_degenerate_box(self, toy_model, toy_env):
        traj = simulate(toy_model, A, toy_env, 50, seed=1)
        pm, report = fit_parametric(traj, W=0.0)
        np.testing.assert_array_equal(pm.w, 0.0)
        assert report.message == "degenerate box W = 0"
        assert report.log_likelihood == pytest.approx(log_likelihood(pm, traj))

    def test_one_transition_matches_grid_scan(self):
        users = UserDistribution.single("q")
        behaviors = BehaviorSpace(["lo", "mid", "hi"])
        signals = SignalSpace(["h"])
        traj = Trajectory(np.array([0, 1]), np.zeros(2), np.zeros(2), behaviors, signals, users)
        pm, report = fit_parametric(traj, W=2.0, features=["bias"], restarts=3, seed=0)

        grid = np.arange(-2.0, 2.0 + 1e-9, 1e-3)
        base = ParametricBehaviorModel(behaviors, signals, [0.0], 2.0, ("bias",))
        scan = [log_likelihood(base.with_w([w]), traj) for w in grid]
        assert abs(pm.w[0] - grid[int(np.argmax(scan))]) <= 1e-3
        assert pm.w[0] == pytest.approx(0.5, abs=1e-3)
        assert report.converged

    def test_recovers_generating_weights(self, toy_env):
        w_star = np.array([0.8, -0.3])
        truth = ParametricBehaviorModel(toy_env.behaviors, toy_env.signals, w_star, 2.0, ("behavior", "bias"))
        traj = simulate(materialize(truth), A, toy_env, 20_000, seed=8)
        pm, report = fit_parametric(traj, W=2.0, features=["behavior", "bias"], restarts=3, seed=8)
        assert np.abs(pm.w - w_star).max() <= 0.1
        assert report.log_likelihood_trace[-1] >= report.log_likelihood_trace[0] - 1e-9
        assert report.log_likelihood == pytest.approx(log_likelihood(pm, traj))
        assert report.w == pytest.approx(pm.w.tolist())

    def test_restarts_checked(self, toy_model, toy_env):
        traj = simulate(toy_model, A, toy_env, 20, seed=1)
        with pytest.raises(InputError):
            fit_parametric(traj, W=1.0, restarts=0)

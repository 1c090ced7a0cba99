import numpy as np
import pytest

from gtml.auction.builders import build_true_model
from gtml.core import (
    BehaviorModel,
    BehaviorSpace,
    ConvergenceError,
    InputError,
    NotErgodicError,
    ParameterMechanism,
    SignalSpace,
    TabularEnvironment,
    UserDistribution,
)
from gtml.markov import (
    ergodicity_certificate,
    exact_risk,
    marginal_kernel,
    model_inf_distance,
    reachable_rows,
    simulate,
    stationary_distribution,
    step,
    tv_distance,
)
from gtml.markov.engine import augmented_kernel, is_irreducible
from gtml.mechanism.erm import sequence_risk

A = ParameterMechanism((0.5,))


def _direct_solve(P):
    n = P.shape[0]
    lhs = np.vstack([P.T - np.eye(n), np.ones(n)])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    return np.linalg.lstsq(lhs, rhs, rcond=None)[0]


def _single_signal_env(n_b, users=None):
    users = users or UserDistribution.single("q", (1, 1))
    behaviors = BehaviorSpace([f"b{i}" for i in range(n_b)])
    signals = SignalSpace(["h"])
    return TabularEnvironment(behaviors, signals, users, np.zeros((n_b, users.support_size)), name="single-signal")


class TestStep:
    def test_point_mass_row(self):
        env = _single_signal_env(3)
        model = BehaviorModel(env.behaviors, env.signals, [[[0, 0, 1]] * 3])
        rng = np.random.default_rng(0)
        assert {step(model, "b0", "h", rng) for _ in range(50)} == {"b2"}

    def test_uniform_row_frequencies(self):
        env = _single_signal_env(4)
        model = BehaviorModel(env.behaviors, env.signals, np.full((1, 4, 4), 0.25))
        rng = np.random.default_rng(1)
        draws = [step(model, "b1", "h", rng) for _ in range(40_000)]
        freq = np.array([draws.count(f"b{i}") for i in range(4)]) / len(draws)
        np.testing.assert_allclose(freq, 0.25, atol=0.01)

    def test_empirical_row_within_hoeffding_radius(self, desk_config, desk_env):
        model = build_true_model(desk_config, desk_env)
        b, h = model.behaviors.label(0), model.signals.label(0)
        row = model.matrix(h)[0]
        n, n_b = 1_000, model.behaviors.size
        radius = 3 * np.sqrt(np.log(2 * n_b) / (2 * n))
        failures = 0
        for rep in range(100):
            rng = np.random.default_rng(rep)
            draws = [model.behaviors.index(step(model, b, h, rng)) for _ in range(n)]
            freq = np.bincount(draws, minlength=n_b) / n
            failures += int(np.abs(freq - row).max() > radius)
        assert failures < 5

    def test_unknown_label(self, toy_model):
        with pytest.raises(InputError):
            step(toy_model, "nope", "h0", np.random.default_rng(0))


class TestSimulate:
    def test_single_record_starts_at_init(self, toy_model, toy_env):
        traj = simulate(toy_model, A, toy_env, 1, init="b1", seed=3)
        assert len(traj) == 1
        assert traj.behaviors.tolist() == [1]

    def test_deterministic_permutation_cycle(self):
        env = _single_signal_env(3)
        cycle = np.array([[[0, 1, 0], [0, 0, 1], [1, 0, 0]]], dtype=float)
        model = BehaviorModel(env.behaviors, env.signals, cycle)
        traj = simulate(model, A, env, 7, init="b0", seed=0)
        assert traj.behaviors.tolist() == [0, 1, 2, 0, 1, 2, 0]

    def test_fixed_seed_reproducible(self, toy_model, toy_env):
        t1 = simulate(toy_model, A, toy_env, 500, seed=11)
        t2 = simulate(toy_model, A, toy_env, 500, seed=11)
        np.testing.assert_array_equal(t1.behaviors, t2.behaviors)
        np.testing.assert_array_equal(t1.users, t2.users)

    def test_signals_follow_signal_function(self, toy_model, toy_env):
        traj = simulate(toy_model, A, toy_env, 300, seed=2)
        table = toy_env.signal_table(A)
        np.testing.assert_array_equal(traj.signals, table[traj.behaviors, traj.users])

    def test_burn_in_start(self, toy_model, toy_env):
        traj = simulate(toy_model, A, toy_env, 100, init="burn_in", seed=5)
        assert len(traj) == 100

    def test_burn_in_certificate_search_uses_max_N(self):
        env = _single_signal_env(2)
        model = BehaviorModel(env.behaviors, env.signals, [[[0.0, 1.0], [0.5, 0.5]]])
        with pytest.raises(NotErgodicError):
            simulate(model, A, env, 10, init="burn_in", seed=1, max_N=1)
        assert len(simulate(model, A, env, 10, init="burn_in", seed=1, max_N=2)) == 10

    def test_zero_probability_next_behavior_never_drawn(self):
        env = _single_signal_env(3)
        model = BehaviorModel(env.behaviors, env.signals, [[[0.5, 0.0, 0.5], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]])
        traj = simulate(model, A, env, 2_000, seed=9)
        assert 1 not in set(traj.behaviors.tolist())

    def test_length_checked(self, toy_model, toy_env):
        with pytest.raises(InputError):
            simulate(toy_model, A, toy_env, 0)

    def test_spaces_checked(self, toy_model):
        with pytest.raises(InputError):
            simulate(toy_model, A, _single_signal_env(2), 5)


class TestMarginalKernel:
    def test_single_signal_kernel_equals_matrix(self):
        env = _single_signal_env(2)
        M = np.array([[[0.2, 0.8], [0.6, 0.4]]])
        model = BehaviorModel(env.behaviors, env.signals, M)
        np.testing.assert_allclose(marginal_kernel(model, A, env).matrix, M[0])

    def test_fair_coin_signal_mixes_matrices(self):
        users = UserDistribution(("q",), np.ones(1), np.array([[0.5, 0.0]]))
        behaviors, signals = BehaviorSpace(["b0", "b1"]), SignalSpace(["h1", "h2"])
        # first-slot click decides the signal; support order (0,0), (0,1), (1,0), (1,1)
        sig = np.array([[0, 0, 1, 1], [0, 0, 1, 1]])
        env = TabularEnvironment(behaviors, signals, users, np.zeros((2, 4)), sig)
        M = np.array([[[0.9, 0.1], [0.4, 0.6]], [[0.3, 0.7], [0.2, 0.8]]])
        model = BehaviorModel(behaviors, signals, M)
        np.testing.assert_allclose(marginal_kernel(model, A, env).matrix, 0.5 * M[0] + 0.5 * M[1])

    def test_matches_brute_force_sum(self, desk_env, desk_config):
        model = build_true_model(desk_config, desk_env)
        a = desk_env.mechanism([0.8, 1.6])
        sig = desk_env.signal_table(a)
        probs = desk_env.users.support_probs
        n_b = desk_env.behaviors.size
        brute = np.zeros((n_b, n_b))
        for b in range(n_b):
            for u, p in enumerate(probs):
                brute[b] += p * model.matrices[sig[b, u], b]
        np.testing.assert_allclose(marginal_kernel(model, a, desk_env).matrix, brute, atol=1e-12)


class TestStationaryDistribution:
    def test_symmetric_kernel(self):
        pi = stationary_distribution(np.array([[0.5, 0.5], [0.5, 0.5]]))
        np.testing.assert_allclose(pi.probs, [0.5, 0.5])

    def test_two_state_kernel(self):
        pi = stationary_distribution(np.array([[0.5, 0.5], [0.25, 0.75]]))
        np.testing.assert_allclose(pi.probs, [1 / 3, 2 / 3], atol=1e-10)

    def test_reducible_kernel(self):
        with pytest.raises(NotErgodicError):
            stationary_distribution(np.eye(2))
        assert not is_irreducible(np.eye(2))

    def test_iteration_budget_carries_residual(self):
        with pytest.raises(ConvergenceError) as info:
            stationary_distribution(np.array([[0.9, 0.1], [0.3, 0.7]]), max_iters=1)
        assert info.value.residual > 0
        assert info.value.iterations == 1

    def test_non_stochastic_kernel_rejected(self):
        with pytest.raises(InputError):
            stationary_distribution(np.array([[0.5, 0.4], [0.5, 0.5]]))

    @pytest.mark.parametrize("n", [2, 3, 5, 8, 16])
    def test_matches_direct_solve(self, n):
        rng = np.random.default_rng(n)
        P = rng.dirichlet(np.ones(n), size=n)
        pi = stationary_distribution(P)
        assert np.abs(pi.probs @ P - pi.probs).sum() <= 1e-12
        np.testing.assert_allclose(pi.probs, _direct_solve(P), atol=1e-8)


class TestExactRisk:
    def test_toy_chain(self, toy_model, toy_env):
        # pi = (0.75, 0.25); losses (-p, -(1 - p))
        assert exact_risk(A, toy_model, toy_env) == pytest.approx(-0.5)
        assert exact_risk(ParameterMechanism((1.0,)), toy_model, toy_env) == pytest.approx(-0.75)

    def test_constant_loss(self, toy_model, toy_env):
        env = TabularEnvironment(toy_env.behaviors, toy_env.signals, toy_env.users, np.full((2, 4), -0.3),
                                 toy_env.signal_table(A))
        assert exact_risk(A, toy_model, env) == pytest.approx(-0.3)

    def test_long_run_average(self, toy_model, toy_env):
        a = ParameterMechanism((0.2,))
        traj = simulate(toy_model, a, toy_env, 100_000, seed=4)
        empirical = sequence_risk(a, toy_env, traj.behaviors, traj.users)
        assert abs(empirical - exact_risk(a, toy_model, toy_env)) <= 0.01 * toy_env.K


class TestErgodicityCertificate:
    def test_all_positive_marginal_chain(self, toy_model, toy_env):
        cert = ergodicity_certificate(toy_model, toy_env, A, max_N=4, chain="marginal")
        assert cert.N0 == 1
        assert cert.delta0 == pytest.approx(0.1)

    def test_augmented_chain_needs_two_steps(self, toy_model, toy_env):
        cert = ergodicity_certificate(toy_model, toy_env, A, max_N=4)
        assert cert.chain == "augmented"
        assert cert.N0 == 2
        assert cert.delta0 > 0
        P, states = augmented_kernel(toy_model, toy_env, A)
        assert len(states) == 4
        np.testing.assert_allclose(P.sum(axis=1), 1.0)

    def test_periodic_swap_chain(self):
        env = _single_signal_env(2)
        model = BehaviorModel(env.behaviors, env.signals, [[[0, 1], [1, 0]]])
        with pytest.raises(NotErgodicError):
            ergodicity_certificate(model, env, A, max_N=50, chain="marginal")

    def test_one_zero_entry_positive_square(self):
        env = _single_signal_env(4)
        P = np.full((4, 4), 0.25)
        P[0] = [0.0, 1 / 3, 1 / 3, 1 / 3]
        model = BehaviorModel(env.behaviors, env.signals, [P])
        cert = ergodicity_certificate(model, env, A, max_N=5, chain="marginal")
        assert cert.N0 == 2
        assert cert.delta0 == pytest.approx((P @ P).min())

    def test_unknown_chain(self, toy_model, toy_env):
        with pytest.raises(InputError):
            ergodicity_certificate(toy_model, toy_env, A, max_N=3, chain="lifted")


class TestDistances:
    def test_identical_models(self, toy_model):
        assert model_inf_distance(toy_model, toy_model) == 0.0

    def test_maximal_row_disagreement(self):
        env = _single_signal_env(2)
        m1 = BehaviorModel(env.behaviors, env.signals, [[[1, 0], [0.5, 0.5]]])
        m2 = BehaviorModel(env.behaviors, env.signals, [[[0, 1], [0.5, 0.5]]])
        assert model_inf_distance(m1, m2) == pytest.approx(2.0)

    def test_matches_triple_loop(self):
        env = _single_signal_env(3)
        rng = np.random.default_rng(9)
        m1 = BehaviorModel(env.behaviors, env.signals, rng.dirichlet(np.ones(3), size=(1, 3)))
        m2 = BehaviorModel(env.behaviors, env.signals, rng.dirichlet(np.ones(3), size=(1, 3)))
        brute = max(
            sum(abs(m1.matrices[0, b, k] - m2.matrices[0, b, k]) for k in range(3))
            for b in range(3)
        )
        assert model_inf_distance(m1, m2) == pytest.approx(brute)

    def test_pseudometric(self):
        env = _single_signal_env(3)
        rng = np.random.default_rng(10)
        models = [BehaviorModel(env.behaviors, env.signals, rng.dirichlet(np.ones(3), size=(1, 3))) for _ in range(4)]
        for x in models:
            for y in models:
                assert model_inf_distance(x, y) == pytest.approx(model_inf_distance(y, x))
                for z in models:
                    assert model_inf_distance(x, z) <= model_inf_distance(x, y) + model_inf_distance(y, z) + 1e-12

    def test_row_mask(self, toy_model, toy_env):
        other = BehaviorModel(toy_env.behaviors, toy_env.signals, [[[0.9, 0.1], [0.7, 0.3]], [[0.1, 0.9], [0.3, 0.7]]])
        mask = reachable_rows(A, toy_env)
        np.testing.assert_array_equal(mask, [[True, False], [False, True]])
        assert model_inf_distance(toy_model, other, rows=mask) == 0.0
        assert model_inf_distance(toy_model, other) == pytest.approx(1.0)

    def test_tv(self):
        assert tv_distance([0.3, 0.7], [0.3, 0.7]) == 0.0
        assert tv_distance([1, 0], [0, 1]) == 1.0
        assert tv_distance([0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.25)
        with pytest.raises(InputError):
            tv_distance([1.0], [0.5, 0.5])

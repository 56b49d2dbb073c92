import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stopgame import (StochasticGame, make_random_game, solve_Q, value_iterate)
from stopgame.features import (FeatureMap, RankDeficientFeatures, constant, from_spec,
                               onehot, polynomial)
from stopgame.learner import (LearnerState, LearningDiverged, behavior_kernel,
                              error_bounds, greedy_action, greedy_from_weights,
                              mu_inner, mu_norm, project, projected_fixed_point,
                              projection_weights, run_learning, stationary_distribution,
                              td_update)
from stopgame.solver import apply_F

from conftest import one_state, two_state_chain


def _reference_run(game, fmap, n_steps, seed, restart_period=100, a=100.0, b=100.0,
                   greedy=True):
    """Plain Python loop over the same random stream as ``run_learning``."""
    rng = np.random.default_rng(seed)
    n, m = game.n_states, game.n_actions
    s = int(rng.integers(n))
    u = rng.random((n_steps, 4))
    cdf = np.cumsum(game.transition, axis=2)
    learner = LearnerState(np.zeros(fmap.n_features), 0, a, b)
    for i in range(n_steps):
        a_beh = min(int(u[i, 0] * m), m - 1)
        row = cdf[a_beh, s]
        hits = np.nonzero(row > u[i, 1] * row[-1])[0]
        s_next = int(hits[0]) if hits.size else n - 1
        if greedy:
            a_star = greedy_action(game, fmap, learner.weights, s)
            if a_beh == a_star:
                learner = td_update(learner, fmap, game, s, s_next, action=a_star)
        else:
            learner = td_update(learner, fmap, game, s, s_next)
        s = min(int(u[i, 3] * n), n - 1) if u[i, 2] < 1.0 / restart_period else s_next
    return learner


class TestTdUpdate:
    def test_single_state_step(self):
        g = one_state(reward=1.0, bequest=100.0, discount=0.5)
        out = td_update(LearnerState([0.0]), onehot(1), g, 0, 0, alpha=0.1)
        assert out.weights.tolist() == [pytest.approx(0.1)]
        assert out.step == 1

    def test_fixed_point_is_stationary(self):
        g = one_state(reward=1.0, bequest=100.0, discount=0.5)
        out = td_update(LearnerState([2.0]), onehot(1), g, 0, 0, alpha=0.3)
        assert out.weights.tolist() == [2.0]

    def test_chain_zero_reward_step(self, chain):
        out = td_update(LearnerState([0.0, 0.0]), onehot(2), chain, 0, 1, alpha=0.1)
        assert out.weights.tolist() == [0.0, 0.0]

    def test_bequest_caps_target(self, chain):
        q = solve_Q(chain, tol=1e-13)
        # successor 1 is worth min(Q, G) there
        out = td_update(LearnerState(q), onehot(2), chain, 0, 1, action=0, alpha=1.0)
        target = chain.reward[0, 0] + chain.discount * min(q[1], chain.bequest[1])
        assert out.weights[0] == pytest.approx(target)
        assert out.weights[1] == q[1]

    def test_schedule(self):
        st_ = LearnerState([0.0], step=100, a=100.0, b=100.0)
        assert st_.alpha == pytest.approx(0.5)
        with pytest.raises(ValueError):
            LearnerState([0.0], a=0.0)


class TestRunLearning:
    def test_zero_steps(self):
        g = make_random_game(3, 2, seed=0)
        state, diag = run_learning(g, onehot(3), 0)
        assert state.weights.tolist() == [0.0, 0.0, 0.0]
        assert diag.n_updates == 0 and diag.n_transitions == 0

    def test_single_state_converges(self):
        g = one_state(reward=1.0, bequest=100.0, discount=0.5)
        state, _ = run_learning(g, onehot(1), 100_000, seed=3)
        assert abs(state.weights[0] - 2.0) <= 0.05

    def test_same_seed_same_trajectory(self):
        g = make_random_game(4, 2, seed=5)
        a, da = run_learning(g, polynomial(4, 1), 20_000, seed=11, record_every=100)
        b, db = run_learning(g, polynomial(4, 1), 20_000, seed=11, record_every=100)
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(da.td_errors, db.td_errors)

    @pytest.mark.parametrize("greedy", [True, False])
    def test_kernel_matches_reference_loop(self, greedy):
        g = make_random_game(4, 3, seed=8)
        fmap = polynomial(4, 1)
        target = "greedy" if greedy else "max_reward"
        state, diag = run_learning(g, fmap, 3000, seed=21, target=target)
        ref = _reference_run(g, fmap, 3000, seed=21, greedy=greedy)
        np.testing.assert_allclose(state.weights, ref.weights, rtol=1e-12, atol=1e-12)
        assert state.step == ref.step == diag.n_updates
        assert diag.n_transitions == 3000

    def test_divergence_guard(self):
        g = make_random_game(3, 2, seed=0, discount=0.99)
        fmap = FeatureMap(np.array([[1.0], [50.0], [100.0]]))
        with pytest.raises(LearningDiverged) as info:
            run_learning(g, fmap, 100_000, step_size=(1e4, 1.0), target="max_reward")
        assert info.value.state.step > 0
        assert info.value.diagnostics.n_updates == info.value.state.step

    def test_diagnostics_csv(self, tmp_path):
        g = make_random_game(3, 2, seed=1)
        q = solve_Q(g, tol=1e-12)
        _, diag = run_learning(g, onehot(3), 5000, r_star=q, record_every=500)
        path = tmp_path / "d.csv"
        diag.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "step,weight_error,td_error"
        assert len(lines) == 1 + len(diag.steps)
        assert np.all(np.diff(diag.steps) == 500)

    def test_bad_arguments(self):
        g = make_random_game(3, 2)
        with pytest.raises(ValueError):
            run_learning(g, onehot(3), 10, target="sarsa")
        with pytest.raises(ValueError):
            run_learning(g, onehot(4), 10)
        with pytest.raises(ValueError):
            run_learning(g, onehot(3), 10, step_size=(1.0, 0.0))


class TestStationaryDistribution:
    def test_symmetric_chain_is_uniform(self):
        P = np.full((2, 4, 4), 0.25)
        g = StochasticGame(P, np.zeros((4, 2)), np.zeros(4), 0.9)
        np.testing.assert_allclose(stationary_distribution(g), 0.25, atol=1e-12)

    def test_null_space_oracle(self):
        for seed in range(10):
            g = make_random_game(5, 2, seed=seed)
            K = behavior_kernel(g, restart_prob=0.0)
            w, v = np.linalg.eig(K.T)
            ref = np.real(v[:, np.argmin(np.abs(w - 1.0))])
            ref /= ref.sum()
            mu = stationary_distribution(g, restart_prob=0.0)
            np.testing.assert_allclose(mu, ref, atol=1e-10)

    def test_restart_mass_keeps_support_full(self):
        P = np.zeros((1, 3, 3))
        P[0, :, 0] = 1.0        # everything drains into state 0
        g = StochasticGame(P, np.zeros((3, 1)), np.zeros(3), 0.9)
        mu = stationary_distribution(g, restart_prob=0.01)
        assert np.all(mu > 0)
        assert mu[0] > 0.99

    def test_report(self):
        rep = stationary_distribution(make_random_game(3, 2), return_info=True)
        assert rep.converged and rep.value.sum() == pytest.approx(1.0)


class TestProjection:
    def test_onehot_is_identity(self):
        mu = np.array([0.1, 0.2, 0.7])
        q = np.array([3.0, -1.0, 2.5])
        np.testing.assert_allclose(project(onehot(3), mu, q), q, atol=1e-12)

    def test_constant_is_mean(self):
        mu = np.array([0.5, 0.25, 0.25])
        q = np.array([1.0, 2.0, 4.0])
        np.testing.assert_allclose(project(constant(3), mu, q), 2.0, atol=1e-12)

    def test_normal_equations(self):
        rng = np.random.default_rng(0)
        Phi = rng.normal(size=(6, 2))
        mu = rng.dirichlet(np.ones(6))
        q = rng.normal(size=6)
        D = np.diag(mu)
        ref = np.linalg.solve(Phi.T @ D @ Phi, Phi.T @ D @ q)
        np.testing.assert_allclose(projection_weights(FeatureMap(Phi), mu, q), ref, atol=1e-10)

    def test_residual_orthogonal_to_features(self):
        rng = np.random.default_rng(1)
        fmap = polynomial(7, 2)
        mu = rng.dirichlet(np.ones(7))
        q = rng.normal(size=7)
        res = q - project(fmap, mu, q)
        for k in range(fmap.n_features):
            assert abs(mu_inner(res, fmap.matrix[:, k], mu)) <= 1e-10

    def test_rank_deficiency_named(self):
        fmap = FeatureMap(np.array([[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]))
        with pytest.raises(RankDeficientFeatures, match=r"\[1\]"):
            project(fmap, np.full(3, 1 / 3), np.zeros(3))


class TestProjectedFixedPoint:
    @pytest.mark.parametrize("seed", range(4))
    def test_onehot_recovers_q_star(self, seed):
        g = make_random_game(5, 2, seed=seed)
        mu = stationary_distribution(g)
        r = projected_fixed_point(g, onehot(5), mu, tol=1e-12)
        np.testing.assert_allclose(r.weights, solve_Q(g, tol=1e-13), atol=1e-9)

    def test_unique_from_two_starts(self):
        g = make_random_game(6, 3, seed=4)
        mu = stationary_distribution(g)
        fmap = polynomial(6, 2)
        a = projected_fixed_point(g, fmap, mu, tol=1e-12)
        b = projected_fixed_point(g, fmap, mu, tol=1e-12, r0=[50.0, -20.0, 7.0])
        np.testing.assert_allclose(fmap.values(a.weights), fmap.values(b.weights), atol=1e-9)

    def test_residual_below_tol(self):
        g = make_random_game(5, 2, seed=0)
        mu = stationary_distribution(g)
        fmap = polynomial(5, 1)
        r = projected_fixed_point(g, fmap, mu, tol=1e-11)
        q = fmap.values(r.weights)
        assert mu_norm(project(fmap, mu, apply_F(g, q)) - q, mu) <= 1e-10


class TestGreedyFromWeights:
    def test_stop_where_bequest_is_small(self, chain):
        q = solve_Q(chain, tol=1e-13)
        policy, stop = greedy_from_weights(chain, onehot(2), q)
        sol = value_iterate(chain, tol=1e-13)
        assert stop.stop.tolist() == sol.stop_set.stop.tolist()
        assert policy.action.tolist() == sol.policy.action.tolist()

    def test_extreme_weights(self):
        g = make_random_game(4, 2, seed=0)
        _, stop = greedy_from_weights(g, constant(4), [1e12])
        assert stop.stop.all()
        _, stop = greedy_from_weights(g, constant(4), [-1e12])
        assert not stop.stop.any()


class TestErrorBounds:
    def test_full_basis_is_exact(self):
        g = make_random_game(4, 2, seed=2)
        mu = stationary_distribution(g)
        q = solve_Q(g, tol=1e-13)
        r = projected_fixed_point(g, onehot(4), mu, tol=1e-13)
        rep = error_bounds(g, onehot(4), mu, q, r)
        assert rep.projection_error <= 1e-10
        assert rep.weight_error <= 1e-9 and abs(rep.performance_loss) <= 1e-9
        assert rep.weight_ok and rep.performance_ok

    def test_constant_feature_two_states(self):
        g = two_state_chain()
        mu = stationary_distribution(g)
        q = solve_Q(g, tol=1e-13)
        r = projected_fixed_point(g, constant(2), mu, tol=1e-13)
        rep = error_bounds(g, constant(2), mu, q, r)
        assert rep.projection_error > 0
        assert rep.weight_ok and rep.performance_ok

    def test_tiny_discount(self):
        g = make_random_game(5, 2, seed=3, discount=0.01)
        mu = stationary_distribution(g)
        q = solve_Q(g, tol=1e-13)
        r = projected_fixed_point(g, constant(5), mu, tol=1e-13)
        rep = error_bounds(g, constant(5), mu, q, r)
        assert rep.weight_ok and rep.performance_ok
        assert rep.weight_bound == pytest.approx(rep.projection_error / np.sqrt(1 - 1e-4))


def _game_with_shared_kernel(seed, n, m, gamma):
    rng = np.random.default_rng(seed)
    P = np.repeat(rng.dirichlet(np.ones(n), size=n)[None], m, axis=0)
    R = rng.uniform(-1, 1, size=(n, m))
    G = rng.uniform(-5, 5, size=n)
    return StochasticGame(P, R, G, gamma)


class TestNormInequalities:
    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10**6), n=st.integers(1, 6))
    def test_kernel_nonexpansive_under_own_measure(self, seed, n):
        g = make_random_game(n, 2, seed=seed)
        mu = stationary_distribution(g)
        K = behavior_kernel(g)
        f = np.random.default_rng(seed).normal(size=n)
        assert mu_norm(K @ f, mu) <= mu_norm(f, mu) + 1e-9

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10**6), n=st.integers(1, 6), m=st.integers(1, 3))
    def test_F_contracts_with_action_independent_kernel(self, seed, n, m):
        g = _game_with_shared_kernel(seed, n, m, 0.9)
        mu = stationary_distribution(g)
        rng = np.random.default_rng(seed + 1)
        q1, q2 = rng.normal(scale=5, size=(2, n))
        lhs = mu_norm(apply_F(g, q1) - apply_F(g, q2), mu)
        assert lhs <= 0.9 * mu_norm(q1 - q2, mu) + 1e-9

    def test_F_need_not_contract_in_mu_norm(self):
        # action-dependent kernels can break the mu-norm contraction
        worst = 0.0
        for seed in range(2000):
            g = make_random_game(3, 2, seed=seed, discount=0.9)
            mu = stationary_distribution(g)
            rng = np.random.default_rng(seed)
            q1, q2 = rng.normal(scale=5, size=(2, 3))
            ratio = (mu_norm(apply_F(g, q1) - apply_F(g, q2), mu)
                     / mu_norm(q1 - q2, mu))
            worst = max(worst, ratio)
            if worst > 0.9:
                break
        assert worst > 0.9

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10**6), n=st.integers(2, 7))
    def test_projection_nonexpansive_and_pythagoras(self, seed, n):
        rng = np.random.default_rng(seed)
        mu = rng.dirichlet(np.ones(n)) + 1e-3
        mu /= mu.sum()
        fmap = polynomial(n, min(2, n - 1))
        q, v = rng.normal(size=(2, n))
        pq = project(fmap, mu, q)
        assert mu_norm(pq - project(fmap, mu, v), mu) <= mu_norm(q - v, mu) + 1e-9
        phi = fmap.values(rng.normal(size=fmap.n_features))
        lhs = mu_norm(phi - q, mu) ** 2
        rhs = mu_norm(phi - pq, mu) ** 2 + mu_norm(pq - q, mu) ** 2
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


class TestFeatureSpecs:
    def test_specs(self):
        assert from_spec("onehot", 3).matrix.shape == (3, 3)
        assert from_spec("constant", 3).matrix.shape == (3, 1)
        np.testing.assert_allclose(from_spec("poly:1", 3).matrix[:, 1], [0, 0.5, 1])

    def test_file_features(self):
        g = make_random_game(3, 2).replace(features=np.eye(3)[:, :2])
        assert from_spec("file", 3, g).n_features == 2
        with pytest.raises(ValueError):
            from_spec("file", 3, make_random_game(3, 2))

    @pytest.mark.parametrize("bad", ["poly:x", "rbf", "poly:-1"])
    def test_bad_spec(self, bad):
        with pytest.raises(ValueError):
            from_spec(bad, 3)

import numpy as np
import pandas as pd
import pytest
from scipy.special import softmax

from tabcds.data import rollout_policy
from tabcds.envs import CorridorTriTaskSpec, build_corridor_tritask
from tabcds.errors import LearnerDivergenceError, PreconditionError
from tabcds.learning import (
    ConservativeQTable, LearnerConfig, LearnerKind, MuMode, brac_fitted_iteration, clamped_kl, count_pairs,
    cql_fitted_iteration, cql_penalty, cql_sweep, estimate_behavior_policy, extract_policy, q_cap, q_floor,
    stratified_batch, task_columns,
)
from tabcds.learning import cql as cql_module
from tabcds.learning.fitting import check_divergence
from tabcds.learning.trainer import LOG_COLUMNS, train_multitask
from tabcds.mdp import MultiTaskMdp, ProblemShape, TabularPolicy, value_iteration
from tabcds.sharing import cds_weighted, no_share, share_all


def _bandit():
    """One terminal state, two actions paying 1 each."""
    return MultiTaskMdp(np.ones((1, 2, 1)), np.ones((1, 1, 2)), 0.9, [1.0], np.ones((1, 1), dtype=bool))


class TestBehaviorPolicy:

    def test_count_ratios(self, random_mdp, make_dataset):
        mdp = random_mdp(np.random.default_rng(0), num_states=3, num_actions=2, num_tasks=1)
        data = make_dataset(mdp, 0, [0, 0, 0, 0, 1], [1, 1, 1, 0, 0])
        behavior = estimate_behavior_policy([data], 3, 2)
        np.testing.assert_allclose(behavior.probs[0, 0], [0.25, 0.75])
        np.testing.assert_allclose(behavior.probs[0, 1], [1.0, 0.0])
        np.testing.assert_array_equal(behavior.observed[0], [True, True, False])
        np.testing.assert_allclose(behavior.as_policy().probs[0, 2], [0.5, 0.5])
        np.testing.assert_array_equal(count_pairs([0, 0, 2], [1, 1, 0], 3, 2), [[0, 2], [0, 0], [1, 0]])

    def test_datasets_must_be_in_task_order(self, random_mdp, make_dataset):
        mdp = random_mdp(np.random.default_rng(0), num_states=3, num_actions=2)
        data = make_dataset(mdp, 1, [0], [0])
        with pytest.raises(PreconditionError):
            estimate_behavior_policy([data], 3, 2)


class TestConfig:

    @pytest.mark.parametrize("iterations, rebuild_every, rounds", [(100, 10, 10), (5, 10, 1), (25, 10, 3)])
    def test_rounds(self, iterations, rebuild_every, rounds):
        assert LearnerConfig(iterations=iterations, rebuild_every=rebuild_every).rounds == rounds

    @pytest.mark.parametrize("kwargs", [
        {'batch_size_per_task': 3}, {'batch_size_per_task': -2}, {'learning_rate': 0.0}, {'beta': -1.0},
        {'mu_temperature': 0.0}, {'iterations': 0}, {'kl_max': 0.0},
    ])
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(PreconditionError):
            LearnerConfig(**kwargs)

    def test_enums_from_text(self):
        config = LearnerConfig(mu_mode="uniform", learner="brac")
        assert config.mu_mode is MuMode.UNIFORM
        assert config.learner is LearnerKind.BRAC
        assert config.to_dict()['mu_mode'] == "uniform"


class TestPolicyExtraction:

    def test_greedy_ties_to_lowest_action(self):
        policy = extract_policy(np.array([[[1.0, 1.0, 0.0]]]), 0.0)
        np.testing.assert_array_equal(policy.probs[0, 0], [1.0, 0.0, 0.0])

    def test_softmax_temperature(self):
        policy = extract_policy(np.array([[[0.0, np.log(3.0)]]]), 1.0)
        np.testing.assert_allclose(policy.probs[0, 0], [0.25, 0.75])

    def test_support_masks_actions(self):
        support = np.array([[[True, False], [False, False]]])
        policy = extract_policy(np.array([[[0.0, 5.0], [0.0, 5.0]]]), 0.0, support=support)
        np.testing.assert_array_equal(policy.probs[0], [[1.0, 0.0], [0.0, 1.0]])

    def test_table_round_trip(self):
        table = ConservativeQTable(q=np.arange(12.0).reshape(1, 3, 4), beta=2.0, alpha=0.0, mu_mode=MuMode.SOFTMAX)
        restored = ConservativeQTable.from_dict(table.to_dict())
        np.testing.assert_array_equal(restored.q, table.q)
        assert restored.beta == 2.0

    def test_non_finite_table_rejected(self):
        with pytest.raises(LearnerDivergenceError):
            ConservativeQTable(q=np.full((1, 1, 1), np.nan), beta=1.0, alpha=0.0, mu_mode=MuMode.UNIFORM)


class TestFittedIteration:

    def test_unpenalized_learners_reach_optimal_q(self, random_mdp, exhaustive_dataset):
        rng = np.random.default_rng(42)
        config = LearnerConfig(beta=0.0, alpha=0.0, batch_size_per_task=0, iterations=60)
        for _ in range(50):
            mdp = random_mdp(rng, num_states=int(rng.integers(1, 21)), num_actions=int(rng.integers(1, 5)),
                             num_tasks=2, discount=0.5, deterministic=True, terminal_prob=0.2)
            datasets = [exhaustive_dataset(mdp, task) for task in range(2)]
            expected = np.stack([value_iteration(mdp, task).q_values for task in range(2)])
            cql = cql_fitted_iteration(datasets, config, mdp.shape)
            brac = brac_fitted_iteration(datasets, config, mdp.shape)
            np.testing.assert_allclose(cql.q, expected, atol=1e-6)
            np.testing.assert_allclose(brac.q, expected, atol=1e-6)

    def test_penalty_vanishes_at_behavior(self):
        rng = np.random.default_rng(3)
        mass = rng.integers(1, 5, size=(4, 3)).astype(float)
        q = rng.normal(size=(4, 3))
        assert cql_penalty(q, mass, mass / mass.sum(axis=1, keepdims=True)) == pytest.approx(0.0, abs=1e-12)

    def test_bandit_closed_form(self, make_dataset):
        mdp = _bandit()
        data = make_dataset(mdp, 0, [0, 0, 0, 0], [0, 0, 0, 1])
        config = LearnerConfig(beta=5.0, mu_mode=MuMode.UNIFORM, batch_size_per_task=0)
        table = cql_fitted_iteration([data], config, mdp.shape, policy=TabularPolicy.uniform(1, 1, 2), sweeps=1)
        np.testing.assert_allclose(table.q[0, 0], [1.0 + 5.0 / 3.0, -4.0], atol=1e-12)
        on_policy = table.q[0, 0].mean()
        on_behavior = 0.75 * table.q[0, 0, 0] + 0.25 * table.q[0, 0, 1]
        assert on_policy < on_behavior

    def test_softmax_penalty_solve_is_stationary(self):
        rng = np.random.default_rng(7)
        mass = rng.integers(1, 6, size=(5, 3)).astype(float)
        ybar = rng.normal(size=(5, 3))
        config = LearnerConfig(beta=2.0, mu_mode=MuMode.SOFTMAX, newton_steps=100)
        x = cql_sweep(np.zeros((5, 3)), mass, ybar, config)
        freq = mass / mass.sum(axis=1, keepdims=True)
        gradient = freq * (x - ybar) + config.beta * (softmax(x, axis=1) - freq)
        np.testing.assert_allclose(gradient, 0.0, atol=1e-9)

    def test_unseen_states_keep_values(self):
        mass = np.array([[2.0, 0.0], [0.0, 0.0]])
        q = np.array([[0.5, 0.5], [3.0, -1.0]])
        config = LearnerConfig(beta=1.0, mu_mode=MuMode.UNIFORM)
        updated = cql_sweep(q, mass, np.array([[1.0, 0.0], [0.0, 0.0]]), config)
        np.testing.assert_array_equal(updated[1], q[1])
        # The unobserved action only feels the push-down.
        assert updated[0, 1] == pytest.approx(0.0)

    def test_never_logged_action_settles_at_floor(self, make_dataset):
        mdp = MultiTaskMdp(np.ones((1, 2, 1)), np.array([[[1.0, 0.0]]]), 0.9, [1.0], np.zeros((1, 1), dtype=bool))
        data = make_dataset(mdp, 0, [0] * 20, [0] * 20)
        config = LearnerConfig(mu_mode=MuMode.UNIFORM, batch_size_per_task=0, iterations=100)
        table = cql_fitted_iteration([data], config, mdp.shape)
        floor = q_floor(mdp.shape, config.beta)
        assert floor == pytest.approx(-20.0)
        assert table.q[0, 0, 1] == pytest.approx(floor)
        # Logged action: 1 + beta / 2 + gamma * Q, pushed up by the uniform penalty.
        assert table.q[0, 0, 0] == pytest.approx(15.0, rel=1e-3)
        assert np.abs(table.q).max() <= q_cap(mdp.shape, config.beta, config.q_cap_margin)

    def test_converged_softmax_rows_skip_the_solver(self, monkeypatch):
        calls = []
        objective = cql_module._softmax_objective

        def counted(*args):
            calls.append(1)
            return objective(*args)

        monkeypatch.setattr(cql_module, "_softmax_objective", counted)
        rng = np.random.default_rng(11)
        mass = rng.integers(1, 6, size=(8, 4)).astype(float)
        ybar = rng.normal(size=(8, 4))
        config = LearnerConfig(beta=1.0, mu_mode=MuMode.SOFTMAX, newton_steps=50)
        x = cql_sweep(np.zeros((8, 4)), mass, ybar, config)
        assert 0 < len(calls) < 200
        calls.clear()
        again = cql_sweep(x, mass, ybar, config)
        assert calls == []
        np.testing.assert_allclose(again, x, atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_uniform_sweep_gap_identity(self, seed):
        rng = np.random.default_rng(seed)
        mass = rng.integers(1, 5, size=(6, 3)).astype(float)
        freq = mass / mass.sum(axis=1, keepdims=True)
        mu = np.full_like(freq, 1.0 / 3.0)
        chi2 = np.sum((mu - freq) ** 2 / freq, axis=1)
        ybar = rng.normal(size=(6, 3))
        flat = np.repeat(rng.normal(size=(6, 1)), 3, axis=1)
        gaps = []
        for beta in (0.0, 0.5, 1.0, 5.0):
            config = LearnerConfig(beta=beta, mu_mode=MuMode.UNIFORM)
            x = cql_sweep(np.zeros((6, 3)), mass, ybar, config)
            gap = np.sum((mu - freq) * x, axis=1)
            np.testing.assert_allclose(gap, np.sum((mu - freq) * ybar, axis=1) - beta * chi2, atol=1e-10)
            # With action-independent targets the policy side never exceeds the data side.
            flat_gap = np.sum((mu - freq) * cql_sweep(np.zeros((6, 3)), mass, flat, config), axis=1)
            assert (flat_gap <= 1e-12).all()
            gaps.append(flat_gap)
        assert all((later <= earlier + 1e-12).all() for earlier, later in zip(gaps, gaps[1:]))

    @pytest.mark.parametrize("seed", range(3))
    def test_policy_evaluation_value_falls_with_beta(self, random_mdp, make_dataset, seed):
        rng = np.random.default_rng(seed)
        mdp = random_mdp(rng, num_states=6, num_actions=3, num_tasks=1)
        pairs = np.repeat(np.arange(18), rng.integers(1, 3, size=18))
        states, actions = np.divmod(pairs, 3)
        data = make_dataset(mdp, 0, states, actions)
        uniform = TabularPolicy.uniform(1, 6, 3)
        values = []
        for beta in (0.0, 0.5, 1.0, 5.0):
            config = LearnerConfig(beta=beta, mu_mode=MuMode.UNIFORM, batch_size_per_task=0)
            table = cql_fitted_iteration([data], config, mdp.shape, policy=uniform, sweeps=400)
            values.append(table.q[0].mean(axis=1))
        for earlier, later in zip(values, values[1:]):
            assert (later <= earlier + 1e-9).all()
        assert (values[-1] <= values[0] + 1e-9).all()

    def test_divergence_guard(self):
        shape = ProblemShape(num_states=2, num_actions=2, discount=0.9, r_max=1.0)
        assert q_cap(shape, 1.0, 1.0) == pytest.approx(21.0)
        check_divergence(np.full((1, 2, 2), 20.0), 21.0, 1, "CQL")
        with pytest.raises(LearnerDivergenceError):
            check_divergence(np.full((1, 2, 2), -22.0), 21.0, 1, "CQL")
        with pytest.raises(LearnerDivergenceError):
            check_divergence(np.full((1, 2, 2), np.inf), 21.0, 1, "CQL")

    def test_clamped_kl(self):
        behavior = np.array([[0.5, 0.5], [1.0, 0.0], [0.0, 0.0]])
        observed = np.array([True, True, False])
        kl, clamped = clamped_kl(behavior.copy() + np.array([[0, 0], [0, 0], [0.5, 0.5]]), behavior, observed, 20.0)
        assert kl[0] == pytest.approx(0.0)
        assert kl[1] == pytest.approx(0.0)
        assert kl[2] == 20.0
        np.testing.assert_array_equal(clamped, [False, False, True])
        kl, clamped = clamped_kl(np.array([[0.5, 0.5]]), np.array([[1.0, 0.0]]), np.array([True]), 20.0)
        assert clamped[0] and kl[0] == 20.0


class TestBatches:

    def test_stratified_halves(self, random_mdp, make_dataset):
        mdp = random_mdp(np.random.default_rng(0), num_states=3, num_actions=2)
        data = make_dataset(mdp, 0, [0, 1, 2, 0, 1], [0, 0, 0, 1, 1], origins=[0, 0, 1, 1, 1])
        columns = task_columns([data, make_dataset(mdp, 1, [0], [0])])[0]
        batch = stratified_batch(columns, 8, np.random.default_rng(1))
        assert len(batch) == 8
        assert batch.original.sum() == 4

    def test_own_data_only(self, random_mdp, make_dataset):
        mdp = random_mdp(np.random.default_rng(0), num_states=3, num_actions=2, num_tasks=1)
        columns = task_columns([make_dataset(mdp, 0, [0, 1], [0, 1])])[0]
        batch = stratified_batch(columns, 6, np.random.default_rng(0))
        assert len(batch) == 6
        assert batch.original.all()

    def test_weights_must_be_positive(self, random_mdp, make_dataset):
        mdp = random_mdp(np.random.default_rng(0), num_states=3, num_actions=2, num_tasks=1)
        with pytest.raises(PreconditionError):
            task_columns([make_dataset(mdp, 0, [0, 1], [0, 1])], weights=[np.array([1.0, 0.0])])


class TestTrainer:

    @pytest.fixture
    def scenario(self):
        mdp = build_corridor_tritask(CorridorTriTaskSpec(length=5, slip=0.1))
        uniform = TabularPolicy.uniform(1, mdp.num_states, mdp.num_actions)
        datasets = [rollout_policy(mdp, uniform, task, size, seed=task)
                    for task, size in enumerate((40, 30, 20))]
        config = LearnerConfig(iterations=20, rebuild_every=10, batch_size_per_task=0)
        return mdp, datasets, config

    def test_no_share_keeps_own_data(self, scenario):
        mdp, datasets, config = scenario
        result = train_multitask(mdp, datasets, no_share(), config, seed=0)
        assert list(result.log.columns) == LOG_COLUMNS
        assert len(result.log) == 9
        assert result.log.groupby('task')['dataset_size'].nunique().eq(1).all()
        np.testing.assert_array_equal(result.log[result.log['round'] == 2]['dataset_size'], [40, 30, 20])
        assert len(result.returns) == 3

    def test_share_all_pools_everything(self, scenario):
        mdp, datasets, config = scenario
        result = train_multitask(mdp, datasets, share_all(), config, seed=0)
        later = result.log[result.log['round'] >= 1]
        assert (later['dataset_size'] == 90).all()
        assert (later['admitted_fraction'] == 1.0).all()
        assert all(len(d) == 90 for d in result.effective)
        assert len(result.admissions_frame()) == (30 + 20) + (40 + 20) + (40 + 30)

    def test_same_seed_same_log(self, scenario):
        mdp, datasets, config = scenario
        first = train_multitask(mdp, datasets, share_all(), config, seed=5)
        second = train_multitask(mdp, datasets, share_all(), config, seed=5)
        pd.testing.assert_frame_equal(first.log, second.log)
        np.testing.assert_array_equal(first.q_table.q, second.q_table.q)

    def test_weighted_temperature_stays_clipped(self, scenario):
        mdp, datasets, config = scenario
        strategy = cds_weighted(tau_min=1.0, tau_max=2.0)
        result = train_multitask(mdp, datasets, strategy, config, seed=0)
        assert all(1.0 <= tau <= 2.0 for tau in result.temperature.taus)
        for data in result.effective:
            assert ((data.weights > 0) & (data.weights <= 1)).all()

    def test_dataset_count_must_match(self, scenario):
        mdp, datasets, config = scenario
        with pytest.raises(PreconditionError):
            train_multitask(mdp, datasets[:2], no_share(), config, seed=0)

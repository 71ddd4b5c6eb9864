import math

import numpy as np
import pandas as pd
import pytest
from PIL import Image

from tabcds.analysis import (
    BoundConstants, RunSummary, check_lemma1, check_lemma2, compose_zeta, d_cql, d_cql_rows, dataset_kl,
    kl_policy_divergence, lab_ramp, lemma1_threshold, render_state_heatmap, sampling_error_term, scenario_report,
    smooth_rows, spi_bound, total_variation, weight_summary,
)
from tabcds.errors import PreconditionError, SupportError
from tabcds.learning import estimate_behavior_policy
from tabcds.mdp import OccupancyMeasure, TabularPolicy


class TestDivergences:

    def test_d_cql_example(self):
        assert d_cql([0.5, 0.5], [0.25, 0.75]) == pytest.approx(1.0 / 3.0)
        assert d_cql([0.2, 0.8], [0.2, 0.8]) == pytest.approx(0.0, abs=1e-15)

    def test_d_cql_is_chi_square(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            size = int(rng.integers(2, 6))
            p, q = rng.dirichlet(np.ones(size)), rng.dirichlet(np.ones(size))
            value = d_cql(p, q)
            assert value >= -1e-12
            assert value == pytest.approx(np.sum((p - q) ** 2 / q), rel=1e-9, abs=1e-12)

    def test_d_cql_support(self):
        with pytest.raises(SupportError):
            d_cql([1.0, 0.0], [0.0, 1.0])
        assert d_cql([0.0, 1.0], [0.5, 0.5]) == pytest.approx(1.0)
        rows = d_cql_rows(np.array([[1.0, 0.0], [0.5, 0.5]]), np.array([[0.0, 1.0], [0.5, 0.5]]))
        assert rows[0] == math.inf
        assert rows[1] == pytest.approx(0.0)

    def test_total_variation(self):
        np.testing.assert_allclose(total_variation([[1.0, 0.0]], [[0.25, 0.75]]), [0.75])

    def test_smoothing_touches_only_violated_rows(self):
        behavior = np.array([[1.0, 0.0], [0.5, 0.5]])
        policy = np.array([[0.0, 1.0], [1.0, 0.0]])
        smoothed = smooth_rows(behavior, policy, 0.1)
        np.testing.assert_allclose(smoothed[0], [0.95, 0.05])
        np.testing.assert_array_equal(smoothed[1], behavior[1])

    def test_kl_of_deterministic_policy(self):
        policy = TabularPolicy(np.array([[[1.0, 0.0]]]))
        behavior = TabularPolicy(np.array([[[0.25, 0.75]]]))
        report = kl_policy_divergence(policy, behavior, OccupancyMeasure(0, np.array([1.0])), 0)
        assert report.average_kl == pytest.approx(math.log(4.0))
        assert report.to_dict()['occupancy_source'] == "policy"

    def test_kl_of_policy_against_itself_is_zero(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            num_tasks, num_states = int(rng.integers(1, 4)), int(rng.integers(1, 8))
            num_actions = int(rng.integers(2, 5))
            probs = rng.dirichlet(np.ones(num_actions), size=(num_tasks, num_states))
            probs[rng.random((num_tasks, num_states)) < 0.3] = np.eye(num_actions)[0]
            policy = TabularPolicy(probs)
            task = int(rng.integers(num_tasks))
            alive = rng.uniform(0.2, 1.0)
            occupancy = OccupancyMeasure(task, rng.dirichlet(np.ones(num_states)) * alive, terminated_mass=1.0 - alive)
            report = kl_policy_divergence(policy, policy, occupancy, task)
            assert report.average_kl == pytest.approx(0.0, abs=1e-10)
            np.testing.assert_allclose(report.per_state, 0.0, atol=1e-10)

    def test_on_policy_data_never_raises_state_kl(self, random_mdp, make_dataset):
        rng = np.random.default_rng(1)
        for _ in range(30):
            mdp = random_mdp(rng, num_states=4, num_actions=3, num_tasks=1)
            actions = rng.integers(3, size=4)
            policy = TabularPolicy.deterministic(actions[None], 3)
            n = int(rng.integers(1, 10))
            states = rng.integers(4, size=n)
            before = make_dataset(mdp, 0, states, rng.integers(3, size=n))
            extra = rng.integers(4, size=5)
            after = make_dataset(mdp, 0, np.concatenate([before.states, extra]),
                                 np.concatenate([before.actions, actions[extra]]))
            kl_before = dataset_kl(policy, before, mdp, 0).per_state
            kl_after = dataset_kl(policy, after, mdp, 0).per_state
            assert (kl_after <= kl_before + 1e-12).all()

    def test_unknown_occupancy(self, random_mdp, make_dataset):
        mdp = random_mdp(np.random.default_rng(0), num_tasks=1)
        data = make_dataset(mdp, 0, [0], [0])
        with pytest.raises(PreconditionError):
            dataset_kl(TabularPolicy.uniform(1, 5, 3), data, mdp, 0, occupancy="stationary")

    def test_policy_occupancy_weights_are_a_distribution(self, random_mdp, make_dataset):
        mdp = random_mdp(np.random.default_rng(2), num_tasks=1, terminal_prob=0.3)
        data = make_dataset(mdp, 0, [0, 1, 2], [0, 1, 2])
        report = dataset_kl(TabularPolicy.uniform(1, 5, 3), data, mdp, 0, occupancy="policy")
        assert report.weights.sum() == pytest.approx(1.0)
        assert report.occupancy_source == "policy"


class TestImprovementBound:

    def test_matching_policies_leave_only_sampling_error(self, random_mdp, make_dataset):
        rng = np.random.default_rng(3)
        mdp = random_mdp(rng, num_states=4, num_actions=2, num_tasks=1)
        data = make_dataset(mdp, 0, rng.integers(4, size=12), rng.integers(2, size=12))
        behavior = estimate_behavior_policy([data], 4, 2).as_policy()
        report = spi_bound(mdp, behavior, behavior, behavior, data, 0, alpha=1.0)
        np.testing.assert_allclose(report.divergence, 0.0, atol=1e-12)
        assert report.divergence_bonus == pytest.approx(0.0, abs=1e-12)
        assert report.improvement_term_a == pytest.approx(0.0, abs=1e-12)
        assert report.zeta == report.sampling_error_term
        assert report.gap == pytest.approx(0.0, abs=1e-12)
        assert report.holds

    def test_sampling_term_scales_with_counts(self):
        weights = np.array([0.2, 0.8, 0.0])
        divergence = np.array([1.0, 0.5, 3.0])
        counts = np.array([4, 9, 0])
        base = sampling_error_term(weights, divergence, counts, 1.0, 0.5)
        expected = 4.0 * (0.2 * math.sqrt(2.0 / 4.0) + 0.8 * math.sqrt(1.5 / 9.0))
        assert base == pytest.approx(expected)
        doubled = sampling_error_term(weights, divergence, 2 * counts, 1.0, 0.5)
        assert doubled == pytest.approx(base / math.sqrt(2.0))

    def test_unvisited_count_is_infinite(self):
        assert sampling_error_term([0.5, 0.5], [0.0, 0.0], [3, 0], 1.0, 0.9) == math.inf

    def test_zeta_composition(self):
        assert compose_zeta(3.0, 1.0, 0.5) == 1.5

    def test_report_is_json_friendly(self, random_mdp, make_dataset):
        mdp = random_mdp(np.random.default_rng(4), num_states=3, num_actions=2, num_tasks=1)
        data = make_dataset(mdp, 0, [0], [0])
        report = spi_bound(mdp, TabularPolicy.uniform(1, 3, 2), TabularPolicy.uniform(1, 3, 2),
                           TabularPolicy.uniform(1, 3, 2), data, 0, constants=BoundConstants(c_sample=2.0))
        payload = report.to_dict()
        assert payload['constants']['C_sample'] == 2.0
        assert isinstance(payload['zeta'], (float, str))


class TestLemmas:

    def test_lemma2_cauchy_schwarz_form_always_holds(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            size = int(rng.integers(1, 8))
            weights = rng.dirichlet(np.ones(size))
            counts = rng.integers(1, 50, size=size)
            divergences = rng.exponential(2.0, size=size)
            epsilon = float(weights @ divergences) + rng.uniform(0.0, 1.0)
            report = check_lemma2(weights, divergences, counts, epsilon)
            assert report.holds

    def test_lemma2_stated_form_counterexample(self):
        report = check_lemma2([0.5, 0.5], [2.0, 0.0], [1, 100], 1.0)
        assert report.holds
        assert not report.stated_holds
        assert report.lhs == pytest.approx(0.5 * math.sqrt(3.0) + 0.05)

    def test_lemma2_preconditions(self):
        with pytest.raises(PreconditionError):
            check_lemma2([0.5, 0.5], [2.0, 2.0], [1, 1], 1.0)
        with pytest.raises(PreconditionError):
            check_lemma2([0.5, 0.5], [0.0, 0.0], [1, 0], 1.0)
        with pytest.raises(PreconditionError):
            check_lemma2([0.5, 0.6], [0.0, 0.0], [1, 1], 1.0)

    def test_lemma1_threshold(self):
        assert lemma1_threshold(0.0, 0.0) == 0.0
        assert lemma1_threshold(1.0, 0.0) == math.inf
        assert lemma1_threshold(1.0, 4.0) == 0.25

    def test_lemma1_degenerate_when_policies_agree(self, random_mdp, make_dataset):
        rng = np.random.default_rng(6)
        mdp = random_mdp(rng, num_states=4, num_actions=2, num_tasks=1)
        data = make_dataset(mdp, 0, rng.integers(4, size=10), rng.integers(2, size=10))
        behavior = estimate_behavior_policy([data], 4, 2)
        report = check_lemma1(mdp, data, behavior.as_policy(), behavior, behavior, [0.0, 1.0])
        assert report.statuses == ["degenerate", "degenerate"]
        assert report.c == pytest.approx(2.0 / (1.0 - mdp.discount))

    def test_lemma1_never_fails(self, random_mdp, make_dataset):
        rng = np.random.default_rng(7)
        for _ in range(50):
            mdp = random_mdp(rng, num_states=4, num_actions=2, num_tasks=1, terminal_prob=0.2)
            n = int(rng.integers(3, 15))
            data = make_dataset(mdp, 0, rng.integers(4, size=n), rng.integers(2, size=n))
            pi_star = TabularPolicy(rng.dirichlet(np.ones(2), size=(1, 4)))
            pi_beta = TabularPolicy(rng.dirichlet(np.ones(2), size=(1, 4)))
            pi_beta_star = estimate_behavior_policy([data], 4, 2)
            probe = check_lemma1(mdp, data, pi_star, pi_beta_star, pi_beta, [0.0])
            alphas = [0.0]
            if math.isfinite(probe.threshold_alpha) and probe.threshold_alpha > 0:
                alphas.append(1.1 * probe.threshold_alpha)
            report = check_lemma1(mdp, data, pi_star, pi_beta_star, pi_beta, alphas)
            assert "fail" not in report.statuses
            if probe.total_variation > 0:
                assert report.statuses[0] == "skipped"
            assert len(report.to_frame()) == len(alphas)

    def test_lemma1_rejects_negative_alpha(self, random_mdp, make_dataset):
        mdp = random_mdp(np.random.default_rng(8), num_states=3, num_actions=2, num_tasks=1)
        data = make_dataset(mdp, 0, [0, 1], [0, 1])
        uniform = TabularPolicy.uniform(1, 3, 2)
        with pytest.raises(PreconditionError):
            check_lemma1(mdp, data, uniform, uniform, uniform, [-1.0])


class TestReports:

    def test_scenario_tables_and_flags(self):
        runs = [
            RunSummary("NoShare", returns=(1.0, 2.0), kl=(0.5, 0.5)),
            RunSummary("ShareAll", returns=(2.0, 0.0), kl=(0.4, 0.9)),
        ]
        report = scenario_report(runs, ["forward", "jump"])
        assert list(report.returns['task']) == ["forward", "jump", "average"]
        assert report.returns.loc[2, 'NoShare'] == pytest.approx(1.5)
        assert report.kl_above_baseline == {'ShareAll': ["jump"]}
        long = report.long_frame()
        assert list(long.columns) == ['strategy', 'task', 'J', 'kl_div']
        assert len(long) == 6

    def test_scenario_needs_two_distinct_runs(self):
        run = RunSummary("NoShare", returns=(1.0,), kl=(0.0,))
        with pytest.raises(PreconditionError):
            scenario_report([run])
        with pytest.raises(PreconditionError):
            scenario_report([run, run])

    def test_written_files(self, tmp_path):
        runs = [RunSummary("a", (1.0,), (0.0,)), RunSummary("b", (0.5,), (0.1,))]
        paths = scenario_report(runs, baseline="a").write(tmp_path)
        assert sorted(p.name for p in paths) == [
            "scenario.json", "scenario_kl.csv", "scenario_long.csv", "scenario_returns.csv",
        ]
        assert pd.read_csv(tmp_path / "scenario_returns.csv").shape == (2, 3)

    def test_weight_summary(self):
        admissions = pd.DataFrame({
            'transition_index': [0, 1, 2, 0],
            'origin': [1, 1, 2, 0],
            'target': [0, 0, 0, 1],
            'delta': [0.1, -0.1, 2.0, 0.0],
            'weight': [0.6, 0.4, 0.9, 0.5],
            'admitted': [True, True, False, True],
        })
        summary = weight_summary(admissions)
        assert list(summary.columns) == ["origin", "target", "count", "mean_weight", "admitted_fraction"]
        first = summary.iloc[0]
        assert (first['origin'], first['target']) == (0, 1)
        assert first['mean_weight'] == pytest.approx(0.5)
        row = summary[(summary['origin'] == 2)].iloc[0]
        assert row['mean_weight'] == 0.0
        assert row['admitted_fraction'] == 0.0
        assert weight_summary(admissions.iloc[:0]).empty


class TestRendering:

    def test_heatmap_size_skips_absorbing_state(self, tmp_path):
        coords = np.array([[x, y] for y in range(2) for x in range(3)] + [[-1, -1]])
        values = np.array([0.0, 0.5, 1.0, np.nan, 0.2, 2.0, 7.0])
        ramp = [(0, 0, 0), (255, 255, 255)]
        path = render_state_heatmap(values, coords, tmp_path / "heat.png", cell_size=10, ramp=ramp)
        with Image.open(path) as image:
            assert image.size == (30, 20)
            # (0, 0) is drawn at the bottom-left; value 0 maps to the first colour.
            assert image.getpixel((5, 15)) == (0, 0, 0)
            assert image.getpixel((25, 15)) == (255, 255, 255)

    def test_heatmap_shape_mismatch(self, tmp_path):
        with pytest.raises(PreconditionError):
            render_state_heatmap([0.0, 1.0], np.zeros((3, 2)), tmp_path / "bad.png", ramp=[(0, 0, 0), (1, 1, 1)])

    def test_lab_ramp_endpoints(self):
        ramp = lab_ramp(5)
        assert len(ramp) == 5
        for got, want in ((ramp[0], (0xf7, 0xfb, 0xff)), (ramp[-1], (0x08, 0x30, 0x6b))):
            assert all(abs(g - w) <= 1 for g, w in zip(got, want))

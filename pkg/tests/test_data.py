import numpy as np
import pytest

from tabcds.data import (
    BehaviorConfig, BehaviorStage, DatasetManifest, DatasetQuality, TaskDataset, Trajectory, Transition,
    assign_directed, dumps_dataset, generate_task_dataset, goal_states, loads_dataset, make_medium_replay,
    play_trajectories, read_dataset, relabel, relabel_dataset, reward_mismatches, rollout_policy, split_directed,
    split_undirected, train_behavior, write_dataset,
)
from tabcds.envs import (
    CorridorAction, CorridorTriTaskSpec, MultiGoalGridSpec, build_corridor_tritask, build_multigoal_grid,
)
from tabcds.errors import DatasetFormatError, DatasetSizeError, MissingArtifactError, PreconditionError
from tabcds.mdp import TabularPolicy, exact_policy_evaluation, optimal_policy


@pytest.fixture
def corridor():
    return build_corridor_tritask(CorridorTriTaskSpec(length=6, slip=0.1))


@pytest.fixture
def line_grid():
    """7x1 grid with a goal on every cell."""
    return build_multigoal_grid(MultiGoalGridSpec(width=7, height=1, goals=tuple((x, 0) for x in range(7))))


class TestRelabel:

    def test_own_task_is_identity(self, corridor):
        original = Transition(2, CorridorAction.RIGHT, 1.0, 3, False, 0)
        assert relabel(original, 0, corridor) == original

    def test_corridor_reward_switch(self, corridor):
        relabeled = relabel(Transition(2, CorridorAction.RIGHT, 1.0, 3, False, 0), 1, corridor)
        assert relabeled.r == 0.0
        assert relabeled.origin_task == 0
        assert (relabeled.s, relabeled.a, relabeled.s_next) == (2, CorridorAction.RIGHT, 3)

    def test_goal_state_pays_and_terminates(self, line_grid):
        relabeled = relabel(Transition(4, 1, 0.0, 5, False, 0), 4, line_grid)
        assert relabeled.r == 1.0
        assert relabeled.done

    def test_dataset_relabel_matches_oracle(self, corridor):
        data = rollout_policy(corridor, TabularPolicy.uniform(1, 6, 4), 0, 200, seed=3)
        moved = relabel_dataset(data, 2, corridor)
        assert moved.task == 2
        assert len(reward_mismatches(moved, corridor)) == 0
        np.testing.assert_array_equal(moved.origins, data.origins)
        np.testing.assert_array_equal(moved.states, data.states)

    def test_out_of_range_target(self, corridor):
        data = rollout_policy(corridor, TabularPolicy.uniform(1, 6, 4), 0, 5, seed=0)
        with pytest.raises(IndexError):
            relabel_dataset(data, 3, corridor)


class TestRollouts:

    def test_empty_request(self, corridor):
        data = rollout_policy(corridor, TabularPolicy.uniform(1, 6, 4), 0, 0, seed=0)
        assert len(data) == 0

    def test_negative_request(self, corridor):
        with pytest.raises(PreconditionError):
            rollout_policy(corridor, TabularPolicy.uniform(1, 6, 4), 0, -1, seed=0)

    def test_rewards_follow_oracle(self, corridor):
        data = rollout_policy(corridor, TabularPolicy.uniform(1, 6, 4), 1, 300, seed=1)
        assert len(data) == 300
        assert len(reward_mismatches(data, corridor)) == 0
        assert (data.origins == 1).all()

    def test_episodes_end_after_goal_action(self):
        mdp = build_multigoal_grid(MultiGoalGridSpec(width=3, height=3, goals=((2, 2),)))
        data = rollout_policy(mdp, optimal_policy(mdp), 0, 100, seed=0)
        assert data.dones.sum() == 20
        assert data.dones[4::5].all()
        assert (data.rewards[data.dones] == 1.0).all()

    def test_same_seed_same_data(self, corridor):
        first = generate_task_dataset(corridor, 0, DatasetQuality.EXPERT, 50, seed=3)
        second = generate_task_dataset(corridor, 0, DatasetQuality.EXPERT, 50, seed=3)
        assert dumps_dataset(first) == dumps_dataset(second)
        assert first.manifest.quality is DatasetQuality.EXPERT
        assert first.manifest.size == 50

    def test_split_qualities_are_not_generated(self, corridor):
        with pytest.raises(PreconditionError):
            generate_task_dataset(corridor, 0, DatasetQuality.DIRECTED_SPLIT, 10, seed=0)

    def test_replay_buffer_too_small(self, corridor):
        config = BehaviorConfig(max_episodes=200, horizon=20)
        with pytest.raises(DatasetSizeError):
            make_medium_replay(corridor, 0, seed=0, size=10 ** 6, config=config)

    def test_replay_dataset_is_buffer_prefix(self, corridor):
        data = generate_task_dataset(corridor, 1, DatasetQuality.MEDIUM_REPLAY, 120, seed=2)
        assert len(data) == 120
        assert data.manifest.quality is DatasetQuality.MEDIUM_REPLAY
        assert len(reward_mismatches(data, corridor)) == 0


class TestBehavior:

    def test_medium_policy_returns_half_of_optimum(self, corridor):
        run = train_behavior(corridor, 0, BehaviorStage.MEDIUM, seed=0)
        assert 0.4 * run.optimal_return <= run.policy_return <= 0.6 * run.optimal_return
        assert run.policy_return == pytest.approx(exact_policy_evaluation(corridor, run.policy, 0))

    def test_expert_policy_is_near_optimal(self, corridor):
        run = train_behavior(corridor, 2, BehaviorStage.EXPERT, seed=0)
        assert run.policy_return >= 0.95 * run.optimal_return - 1e-9

    def test_bad_config(self):
        with pytest.raises(PreconditionError):
            BehaviorConfig(epsilon=1.5)
        with pytest.raises(PreconditionError):
            BehaviorConfig(learning_rate=0.0)


class TestSplits:

    def _trajectories(self, count):
        return [Trajectory([j % 7], [1], [(j + 1) % 7]) for j in range(count)]

    def test_undirected_split_is_balanced(self, line_grid):
        trajectories = self._trajectories(14)
        datasets = split_undirected(trajectories, 7, seed=11, mdp=line_grid)
        assert [len(d) for d in datasets] == [2] * 7
        pairs = sorted((int(s), int(n)) for d in datasets for s, n in zip(d.states, d.next_states))
        assert pairs == sorted((int(t.states[0]), int(t.next_states[0])) for t in trajectories)
        assert all(d.manifest.quality is DatasetQuality.UNDIRECTED_SPLIT for d in datasets)

    def test_undirected_split_is_seeded(self, line_grid):
        trajectories = self._trajectories(15)
        first = split_undirected(trajectories, 7, seed=4, mdp=line_grid)
        second = split_undirected(trajectories, 7, seed=4, mdp=line_grid)
        assert [dumps_dataset(d) for d in first] == [dumps_dataset(d) for d in second]
        assert sorted(len(d) for d in first) == [2] * 6 + [3]

    def test_undirected_split_needs_matching_tasks(self, line_grid):
        with pytest.raises(PreconditionError):
            split_undirected(self._trajectories(3), 3, seed=0, mdp=line_grid)

    def test_directed_assignment_ties_to_lowest_task(self):
        mdp = build_multigoal_grid(MultiGoalGridSpec(width=7, height=1, goals=((0, 0), (2, 0), (6, 0))))
        trajectories = [
            Trajectory([3], [1], [4]),
            Trajectory([5], [1], [6]),
            Trajectory([1], [3], [0]),
        ]
        np.testing.assert_array_equal(assign_directed(trajectories, [0, 2, 6], mdp), [1, 2, 0])

    def test_directed_split_relabels_per_goal(self):
        mdp = build_multigoal_grid(MultiGoalGridSpec(width=7, height=1, goals=((0, 0), (6, 0))))
        trajectories = [Trajectory([1, 0], [3, 3], [0, 0]), Trajectory([5], [1], [6])]
        datasets = split_directed(trajectories, goal_states(mdp), mdp)
        assert [len(d) for d in datasets] == [2, 1]
        np.testing.assert_array_equal(datasets[0].rewards, [0.0, 1.0])
        np.testing.assert_array_equal(datasets[0].dones, [False, True])

    def test_play_data(self):
        mdp = build_multigoal_grid(MultiGoalGridSpec(width=4, height=4, goals=((3, 3),)))
        trajectories = play_trajectories(mdp, 20, seed=5, horizon=12, noise=0.0)
        assert len(trajectories) == 20
        assert all(1 <= len(t) <= 12 for t in trajectories)
        again = play_trajectories(mdp, 20, seed=5, horizon=12, noise=0.0)
        assert all(np.array_equal(a.states, b.states) for a, b in zip(trajectories, again))

    @pytest.mark.parametrize("noise", [-0.1, 1.5])
    def test_play_noise_range(self, noise):
        mdp = build_multigoal_grid(MultiGoalGridSpec(width=2, height=2, goals=((1, 1),)))
        with pytest.raises(PreconditionError):
            play_trajectories(mdp, 1, seed=0, noise=noise)


class TestDatasetFiles:

    def test_file_round_trip(self, corridor, tmp_path):
        data = rollout_policy(corridor, TabularPolicy.uniform(1, 6, 4), 2, 40, seed=9)
        path = write_dataset(tmp_path / "task2.jsonl", data)
        restored = read_dataset(path)
        assert restored.task == 2
        assert restored.manifest == data.manifest
        np.testing.assert_array_equal(restored.rewards, data.rewards)
        assert dumps_dataset(restored) == dumps_dataset(data)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingArtifactError):
            read_dataset(tmp_path / "absent.jsonl")

    def test_bad_header(self):
        with pytest.raises(DatasetFormatError):
            loads_dataset("not json\n")
        with pytest.raises(DatasetFormatError):
            loads_dataset('{"format": "other", "version": 1}\n')

    def test_short_record(self):
        header = dumps_dataset(TaskDataset(0, [], [], [], [], [], [], DatasetManifest(
            DatasetQuality.EXPERT, 0, "none", 0)))
        with pytest.raises(DatasetFormatError):
            loads_dataset(header + "[0, 1, 0.0]\n")

    def test_manifest_size_must_match(self):
        with pytest.raises(DatasetFormatError):
            TaskDataset(0, [1], [0], [0.0], [1], [False], [0], DatasetManifest(DatasetQuality.EXPERT, 0, "x", 2))

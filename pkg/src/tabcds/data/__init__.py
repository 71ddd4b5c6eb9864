"""Offline dataset generation, relabeling and storage."""

from .transitions import (
    DatasetManifest, DatasetQuality, TaskDataset, Trajectory, Transition, concatenate_trajectories,
)
from .behavior import BehaviorConfig, BehaviorRun, BehaviorStage, train_behavior
from .rollouts import (
    collect_trajectories, generate_task_dataset, make_medium_replay, play_trajectories, rollout_policy,
)
from .relabeling import (
    assign_directed, goal_states, relabel, relabel_dataset, reward_mismatches, split_directed,
    split_undirected, trajectories_to_dataset,
)
from .dataset_io import dumps_dataset, loads_dataset, read_dataset, write_dataset

__all__ = [
    'DatasetManifest', 'DatasetQuality', 'TaskDataset', 'Trajectory', 'Transition', 'concatenate_trajectories',
    'BehaviorConfig', 'BehaviorRun', 'BehaviorStage', 'train_behavior',
    'collect_trajectories', 'generate_task_dataset', 'make_medium_replay', 'play_trajectories', 'rollout_policy',
    'assign_directed', 'goal_states', 'relabel', 'relabel_dataset', 'reward_mismatches', 'split_directed',
    'split_undirected', 'trajectories_to_dataset',
    'dumps_dataset', 'loads_dataset', 'read_dataset', 'write_dataset',
]

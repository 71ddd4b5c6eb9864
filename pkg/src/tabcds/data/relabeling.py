"""Cross-task relabeling and goal splits of reward-free trajectories."""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import List, Optional, Sequence

import numpy as np

from tabcds.data.transitions import (
    DatasetManifest, DatasetQuality, TaskDataset, Trajectory, Transition, concatenate_trajectories,
)
from tabcds.envs.rewards import is_terminal, task_reward
from tabcds.errors import EmptyDatasetError, PreconditionError
from tabcds.mdp.multitask_mdp import MultiTaskMdp

logger = logging.getLogger(__name__)


def relabel(transition: Transition, target: int, mdp: MultiTaskMdp) -> Transition:
    """Same (s, a, s'), reward and done from ``target``; provenance untouched."""
    return replace(
        transition,
        r=task_reward(mdp, target, transition.s, transition.a),
        done=is_terminal(mdp, target, transition.s),
    )


def relabel_dataset(dataset: TaskDataset, target: int, mdp: MultiTaskMdp) -> TaskDataset:
    """Vectorized ``relabel`` of every transition; the result belongs to ``target``."""
    mdp.check_task(target)
    return TaskDataset(
        task=target,
        states=dataset.states,
        actions=dataset.actions,
        rewards=mdp.rewards[target][dataset.states, dataset.actions],
        next_states=dataset.next_states,
        dones=mdp.terminal[target][dataset.states],
        origins=dataset.origins,
        manifest=dataset.manifest,
    )


def reward_mismatches(dataset: TaskDataset, mdp: MultiTaskMdp, tol: float = 1e-12) -> np.ndarray:
    """Indices whose stored reward disagrees with the reward oracle of ``dataset.task``."""
    expected = mdp.rewards[dataset.task][dataset.states, dataset.actions]
    return np.flatnonzero(np.abs(expected - dataset.rewards) > tol)


def trajectories_to_dataset(
    trajectories: Sequence[Trajectory],
    task: int,
    mdp: MultiTaskMdp,
    quality: DatasetQuality,
    seed: int,
    behavior: str,
) -> TaskDataset:
    states, actions, next_states = concatenate_trajectories(trajectories)
    return TaskDataset(
        task=task,
        states=states,
        actions=actions,
        rewards=mdp.rewards[task][states, actions],
        next_states=next_states,
        dones=mdp.terminal[task][states],
        origins=np.full(len(states), task, dtype=np.int64),
        manifest=DatasetManifest(quality, seed, behavior, len(states)),
    )


def split_undirected(
    trajectories: Sequence[Trajectory],
    num_tasks: int,
    seed: int,
    mdp: MultiTaskMdp,
    behavior: str = "play",
) -> List[TaskDataset]:
    """Random equal partition (sizes differ by at most one trajectory), relabeled per part."""
    if not trajectories:
        raise EmptyDatasetError("nothing to split")
    if num_tasks != mdp.num_tasks:
        raise PreconditionError(f"split into {num_tasks} tasks but the MDP has {mdp.num_tasks}")
    order = np.random.default_rng(seed).permutation(len(trajectories))
    parts = np.array_split(order, num_tasks)
    return [
        trajectories_to_dataset([trajectories[j] for j in part], task, mdp, DatasetQuality.UNDIRECTED_SPLIT,
                                seed, behavior)
        for task, part in enumerate(parts)
    ]


def assign_directed(trajectories: Sequence[Trajectory], goals: Sequence[int], mdp: MultiTaskMdp) -> np.ndarray:
    """Task of the goal closest (Euclidean, on cell coordinates) to each final state; ties to the lowest id."""
    if mdp.coords is None:
        raise PreconditionError("directed splits need cell coordinates on the MDP")
    goal_xy = mdp.coords[np.asarray(goals, dtype=np.int64)]
    finals = np.array([t.final_state for t in trajectories], dtype=np.int64)
    delta = mdp.coords[finals][:, None, :] - goal_xy[None, :, :]
    # Squared integer distances keep ties exact.
    return np.argmin((delta ** 2).sum(axis=2), axis=1)


def split_directed(
    trajectories: Sequence[Trajectory],
    goals: Sequence[int],
    mdp: MultiTaskMdp,
    seed: int = 0,
    behavior: str = "play",
) -> List[TaskDataset]:
    """Each trajectory goes to the goal nearest its final state."""
    if not trajectories:
        raise EmptyDatasetError("nothing to split")
    if any(len(t) == 0 for t in trajectories):
        raise PreconditionError("directed splits need nonempty trajectories")
    if len(goals) != mdp.num_tasks:
        raise PreconditionError(f"{len(goals)} goals for {mdp.num_tasks} tasks")
    assignment = assign_directed(trajectories, goals, mdp)
    datasets = []
    for task in range(len(goals)):
        members = [trajectories[j] for j in np.flatnonzero(assignment == task)]
        datasets.append(trajectories_to_dataset(members, task, mdp, DatasetQuality.DIRECTED_SPLIT, seed, behavior))
        if not members:
            logger.warning("directed split left task %d without trajectories", task)
    return datasets


def goal_states(mdp: MultiTaskMdp, goals: Optional[Sequence[int]] = None) -> List[int]:
    """One representative terminal state per task, the one closest to the region's centre."""
    if goals is not None:
        return [int(g) for g in goals]
    out = []
    for task in range(mdp.num_tasks):
        members = np.flatnonzero(mdp.terminal[task])
        if len(members) == 0:
            raise PreconditionError(f"task {task} has no terminal goal states")
        if mdp.coords is None:
            out.append(int(members[0]))
            continue
        centre = mdp.coords[members].mean(axis=0)
        out.append(int(members[np.argmin(((mdp.coords[members] - centre) ** 2).sum(axis=1))]))
    return out

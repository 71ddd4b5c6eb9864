"""Pieces shared by the fitted Q learners: data columns, batches, targets, divergence guard."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from tabcds.errors import EmptyDatasetError, LearnerDivergenceError, PreconditionError
from tabcds.mdp.multitask_mdp import ProblemShape
from tabcds.utils.notification_manager import NotificationManager, NotificationType


@dataclass(frozen=True, eq=False)
class TaskColumns:
    task: int
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray
    weights: np.ndarray
    original: np.ndarray

    def __len__(self) -> int:
        return len(self.states)

    def take(self, index: np.ndarray) -> "TaskColumns":
        return TaskColumns(self.task, self.states[index], self.actions[index], self.rewards[index],
                           self.next_states[index], self.dones[index], self.weights[index], self.original[index])


def task_columns(datasets: Sequence, weights: Optional[Sequence[np.ndarray]] = None) -> Tuple[TaskColumns, ...]:
    """
    Columns per task from TaskDataset or EffectiveDataset objects.

    Weights default to the dataset's own ``weights`` (effective datasets) or 1.
    """
    if not datasets:
        raise PreconditionError("need one dataset per task")
    out = []
    for index, dataset in enumerate(datasets):
        if dataset.task != index:
            raise PreconditionError(f"dataset at position {index} belongs to task {dataset.task}")
        if len(dataset) == 0:
            raise EmptyDatasetError(f"task {index} has no data")
        if weights is not None and weights[index] is not None:
            w = np.asarray(weights[index], dtype=np.float64)
        else:
            w = np.asarray(getattr(dataset, 'weights', np.ones(len(dataset))), dtype=np.float64)
        if w.shape != (len(dataset),) or (w <= 0).any() or (w > 1).any():
            raise PreconditionError(f"task {index}: weights must lie in (0, 1], one per transition")
        out.append(TaskColumns(
            task=index,
            states=np.asarray(dataset.states, dtype=np.int64),
            actions=np.asarray(dataset.actions, dtype=np.int64),
            rewards=np.asarray(dataset.rewards, dtype=np.float64),
            next_states=np.asarray(dataset.next_states, dtype=np.int64),
            dones=np.asarray(dataset.dones, dtype=bool),
            weights=w,
            original=np.asarray(dataset.origins) == index,
        ))
    return tuple(out)


def stratified_batch(columns: TaskColumns, batch_size: int, rng: np.random.Generator) -> TaskColumns:
    """Half from the task's own data, half from relabeled data (all own data if none was shared)."""
    own = np.flatnonzero(columns.original)
    shared = np.flatnonzero(~columns.original)
    if len(own) == 0:
        own, shared = shared, own
    if len(shared) == 0:
        index = own[rng.integers(len(own), size=batch_size)]
    else:
        half = batch_size // 2
        index = np.concatenate([own[rng.integers(len(own), size=half)],
                                shared[rng.integers(len(shared), size=half)]])
    return columns.take(index)


def pair_statistics(columns: TaskColumns, targets: np.ndarray, num_states: int,
                    num_actions: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Weighted pair mass W(s, a) and weighted mean target y-bar(s, a).

    y-bar is zero where W is zero.
    """
    index = columns.states * num_actions + columns.actions
    size = num_states * num_actions
    mass = np.bincount(index, weights=columns.weights, minlength=size).reshape(num_states, num_actions)
    total = np.bincount(index, weights=columns.weights * targets, minlength=size).reshape(num_states, num_actions)
    mean = np.zeros_like(total)
    np.divide(total, mass, out=mean, where=mass > 0)
    return mass, mean


def bootstrap_values(q_task: np.ndarray, policy_task: np.ndarray) -> np.ndarray:
    """E_{a ~ pi}[Q(s, a)] per state."""
    return np.einsum('sa,sa->s', policy_task, q_task)


def q_cap(shape: ProblemShape, penalty_bound: float, margin: float) -> float:
    """Largest admissible |Q|: (R_max + penalty bound) / (1 - gamma) + margin."""
    return (shape.r_max + penalty_bound) / (1.0 - shape.discount) + margin


def q_floor(shape: ProblemShape, penalty_bound: float) -> float:
    """Lowest value a pushed-down, never-logged action may reach: -(R_max + penalty bound) / (1 - gamma)."""
    return -(shape.r_max + penalty_bound) / (1.0 - shape.discount)


def check_divergence(q: np.ndarray, cap: float, sweep: int, learner: str) -> None:
    bad = ~np.isfinite(q) | (np.abs(q) > cap)
    if bad.any():
        task, s, a = (int(x) for x in np.argwhere(bad)[0])
        message = (f"{learner} diverged at sweep {sweep}: Q[task={task}, s={s}, a={a}] = {q[task, s, a]!r} "
                   f"exceeds cap {cap:.4f}")
        NotificationManager.notify(message, NotificationType.CRITICAL)
        raise LearnerDivergenceError(message)

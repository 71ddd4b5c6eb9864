"""Empirical behavior policy pi_beta(a | s, i) = |D_i(s, a)| / |D_i(s)|."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from tabcds.errors import EmptyDatasetError, PreconditionError
from tabcds.mdp.multitask_mdp import TabularPolicy


@dataclass(frozen=True, eq=False)
class EmpiricalBehaviorPolicy:
    """
    Count-ratio behavior policy per task.

    Rows of unobserved states are all zero and flagged by ``observed``;
    they are never imputed.
    """
    counts: np.ndarray
    probs: np.ndarray
    observed: np.ndarray

    @property
    def num_tasks(self) -> int:
        return self.counts.shape[0]

    @property
    def num_states(self) -> int:
        return self.counts.shape[1]

    @property
    def num_actions(self) -> int:
        return self.counts.shape[2]

    @property
    def state_counts(self) -> np.ndarray:
        return self.counts.sum(axis=2)

    def support(self) -> np.ndarray:
        """(N, S, A) mask of observed pairs."""
        return self.counts > 0

    @classmethod
    def from_counts(cls, counts: np.ndarray) -> "EmpiricalBehaviorPolicy":
        counts = np.array(counts, dtype=np.int64)
        totals = counts.sum(axis=2)
        observed = totals > 0
        probs = np.zeros(counts.shape)
        np.divide(counts, totals[:, :, None], out=probs, where=observed[:, :, None])
        for array in (counts, probs, observed):
            array.setflags(write=False)
        return cls(counts=counts, probs=probs, observed=observed)

    def as_policy(self) -> TabularPolicy:
        """Tabular policy with uniform rows at unobserved states."""
        fill = np.full(self.probs.shape, 1.0 / self.num_actions)
        return TabularPolicy(np.where(self.observed[:, :, None], self.probs, fill))


def count_pairs(states, actions, num_states: int, num_actions: int) -> np.ndarray:
    counts = np.zeros((num_states, num_actions), dtype=np.int64)
    np.add.at(counts, (np.asarray(states, dtype=np.int64), np.asarray(actions, dtype=np.int64)), 1)
    return counts


def estimate_behavior_policy(datasets: Sequence, num_states: int, num_actions: int) -> EmpiricalBehaviorPolicy:
    """
    Exact count ratios for every task.

    Args:
        datasets: one TaskDataset or EffectiveDataset per task, ordered by task id

    Raises:
        EmptyDatasetError: if any task's dataset is empty
    """
    if not datasets:
        raise PreconditionError("need at least one dataset")
    counts = np.zeros((len(datasets), num_states, num_actions), dtype=np.int64)
    for index, dataset in enumerate(datasets):
        if dataset.task != index:
            raise PreconditionError(f"dataset at position {index} belongs to task {dataset.task}")
        if len(dataset) == 0:
            raise EmptyDatasetError(f"task {index} has no data")
        counts[index] = count_pairs(dataset.states, dataset.actions, num_states, num_actions)
    return EmpiricalBehaviorPolicy.from_counts(counts)

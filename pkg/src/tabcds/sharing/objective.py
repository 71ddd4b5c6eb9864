"""
Exhaustive oracle for the joint data-sharing objective on tiny instances:

    J_{D_eff}(pi) - alpha * E_{s ~ d^pi_{D_eff}}[D_CQL(pi, pi_beta^eff)(s)]

evaluated in the empirical MDP of each admissible D_eff.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Tuple

import numpy as np

from tabcds.data.relabeling import relabel_dataset
from tabcds.data.transitions import TaskDataset
from tabcds.errors import PreconditionError
from tabcds.learning.behavior_policy import count_pairs
from tabcds.mdp.empirical import empirical_mdp
from tabcds.mdp.multitask_mdp import MultiTaskMdp, TabularPolicy
from tabcds.mdp.solvers import exact_policy_evaluation, state_occupancy

MAX_ORACLE_CANDIDATES = 16


@dataclass(frozen=True, eq=False)
class _Columns:
    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray

    def __len__(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class SubsetScore:
    admitted: Tuple[int, ...]
    objective: float


def sharing_objective(mdp: MultiTaskMdp, dataset, policy: TabularPolicy, task: int, alpha: float) -> float:
    """
    Objective value of ``policy`` on ``dataset``; -inf when the policy leaves
    the behavior support at a state the empirical MDP can visit.

    States without data contribute no divergence.
    """
    model = empirical_mdp(dataset, mdp)
    extended = policy.with_states(model.num_states)
    value = exact_policy_evaluation(model, extended, task)
    if alpha == 0:
        return value
    counts = count_pairs(dataset.states, dataset.actions, mdp.num_states, mdp.num_actions)
    totals = counts.sum(axis=1)
    pi = policy.for_task(task if policy.num_tasks > 1 else 0)
    divergence = np.zeros(mdp.num_states)
    for s in np.flatnonzero(totals):
        behavior = counts[s] / totals[s]
        if np.any((pi[s] > 0) & (behavior == 0)):
            divergence[s] = np.inf
        else:
            mask = pi[s] > 0
            divergence[s] = np.sum(pi[s][mask] * (pi[s][mask] / behavior[mask] - 1.0))
    occupancy = state_occupancy(model, extended, task).normalized()[:mdp.num_states]
    visited = occupancy > 0
    if np.isinf(divergence[visited]).any():
        return -np.inf
    return value - alpha * float(occupancy[visited] @ divergence[visited])


def _union(original: TaskDataset, shared: TaskDataset, chosen) -> _Columns:
    chosen = np.asarray(chosen, dtype=np.int64)
    return _Columns(
        np.concatenate([original.states, shared.states[chosen]]),
        np.concatenate([original.actions, shared.actions[chosen]]),
        np.concatenate([original.next_states, shared.next_states[chosen]]),
    )


def best_admission_subset(
    mdp: MultiTaskMdp,
    original: TaskDataset,
    candidates: TaskDataset,
    policy: TabularPolicy,
    task: int,
    alpha: float,
) -> SubsetScore:
    """Enumerate every subset of ``candidates`` (relabeled to ``task``) and keep the best; ties to the smallest set."""
    if len(candidates) > MAX_ORACLE_CANDIDATES:
        raise PreconditionError(f"oracle limited to {MAX_ORACLE_CANDIDATES} candidates, got {len(candidates)}")
    shared = relabel_dataset(candidates, task, mdp)
    best = SubsetScore((), sharing_objective(mdp, _union(original, shared, []), policy, task, alpha))
    for size in range(1, len(shared) + 1):
        for subset in combinations(range(len(shared)), size):
            score = sharing_objective(mdp, _union(original, shared, subset), policy, task, alpha)
            if score > best.objective:
                best = SubsetScore(tuple(subset), score)
    return best


def subset_objective(mdp: MultiTaskMdp, original: TaskDataset, candidates: TaskDataset, admitted,
                     policy: TabularPolicy, task: int, alpha: float) -> float:
    shared = relabel_dataset(candidates, task, mdp)
    return sharing_objective(mdp, _union(original, shared, list(admitted)), policy, task, alpha)

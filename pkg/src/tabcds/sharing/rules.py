"""Admission rules: quantile and basic CDS deltas, HIPI and skill routing."""

from __future__ import annotations

import math
from typing import Sequence, Union

import numpy as np

from tabcds.data.transitions import Transition
from tabcds.envs.skill_tags import SkillTag
from tabcds.errors import EmptyDatasetError, PreconditionError
from tabcds.learning.behavior_policy import count_pairs
from tabcds.learning.q_table import ConservativeQTable
from tabcds.mdp.multitask_mdp import TabularPolicy

QTable = Union[ConservativeQTable, np.ndarray]


def _values(q: QTable) -> np.ndarray:
    """Conservative values (N, S, A) of a table or a raw array."""
    if isinstance(q, ConservativeQTable):
        return q.conservative_values()
    return np.asarray(q, dtype=np.float64)


def percentile(values: Sequence[float], k: float) -> float:
    """Nearest-rank percentile: sorted ascending, element ceil(k n / 100) - 1 (index 0 for k = 0)."""
    ordered = np.sort(np.asarray(values, dtype=np.float64).reshape(-1))
    n = len(ordered)
    if n == 0:
        raise EmptyDatasetError("percentile of an empty list")
    if not 0.0 <= k <= 100.0:
        raise PreconditionError(f"k must lie in [0, 100], got {k}")
    index = max(0, math.ceil(k * n / 100.0) - 1)
    return float(ordered[min(index, n - 1)])


def reference_values(q: QTable, target: int, dataset) -> np.ndarray:
    """Q-hat(s', a', i) over every (s', a') in ``dataset``."""
    if len(dataset) == 0:
        raise EmptyDatasetError(f"task {target} has no original data")
    return _values(q)[target][dataset.states, dataset.actions]


def quantile_deltas(q: QTable, states, actions, target: int, dataset, k: float) -> np.ndarray:
    """Vectorized quantile Delta for candidate pairs."""
    threshold = percentile(reference_values(q, target, dataset), k)
    return _values(q)[target][np.asarray(states), np.asarray(actions)] - threshold


def cds_delta_quantile(q: QTable, transition: Transition, target: int, dataset, k: float = 90.0) -> float:
    """
    Q-hat(s, a, i) minus the k-th nearest-rank percentile of Q-hat over D_i.

    A candidate is admitted iff the result is >= 0.
    """
    return float(quantile_deltas(q, [transition.s], [transition.a], target, dataset, k)[0])


def _basic_terms(q: QTable, policy: TabularPolicy, target: int, dataset):
    if len(dataset) == 0:
        raise EmptyDatasetError(f"task {target} has no original data")
    values = _values(q)[target]
    pi = policy.for_task(target if policy.num_tasks > 1 else 0)
    counts = count_pairs(dataset.states, dataset.actions, values.shape[0], values.shape[1])
    totals = counts.sum(axis=1, keepdims=True)
    behavior = np.zeros(counts.shape)
    np.divide(counts, totals, out=behavior, where=totals > 0)
    on_policy = np.einsum('sa,sa->s', pi, values)
    on_behavior = np.einsum('sa,sa->s', behavior, values)
    # Mean over the states of D_i of E_pi Q - E_beta Q.
    regularizer = float(np.mean(on_policy[dataset.states] - on_behavior[dataset.states]))
    return values, on_policy, regularizer


def basic_deltas(q: QTable, policy: TabularPolicy, states, actions, target: int, dataset) -> np.ndarray:
    """Vectorized CDS-basic Delta for candidate pairs."""
    values, on_policy, regularizer = _basic_terms(q, policy, target, dataset)
    states = np.asarray(states, dtype=np.int64)
    actions = np.asarray(actions, dtype=np.int64)
    return regularizer - (on_policy[states] - values[states, actions])


def cds_delta_basic(q: QTable, policy: TabularPolicy, transition: Transition, target: int, dataset) -> float:
    """
    Difference of CQL regularizers:

        E_{s'~D_i}[E_pi Q(s', .) - E_{pi_beta(D_i)} Q(s', .)] - (E_pi Q(s, .) - Q(s, a))

    evaluated exactly from the tabular policy and the empirical behavior of D_i.
    """
    return float(basic_deltas(q, policy, [transition.s], [transition.a], target, dataset)[0])


def hipi_routes(q: QTable, states, actions) -> np.ndarray:
    """Task with the highest Q-hat(s, a, .) per pair; ties to the lowest task id."""
    values = _values(q)
    return np.argmax(values[:, np.asarray(states), np.asarray(actions)], axis=0)


def hipi_route(q: QTable, transition: Transition) -> int:
    return int(hipi_routes(q, [transition.s], [transition.a])[0])


def skill_route(tags: SkillTag, origin: int, target: int) -> bool:
    """Admit iff both tasks carry the same skill label."""
    return tags.skill_of(origin) == tags.skill_of(target)

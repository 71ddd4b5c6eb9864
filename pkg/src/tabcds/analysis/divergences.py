"""Policy divergences: D_CQL, total variation and occupancy-weighted KL."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, Union

import numpy as np
from scipy.special import rel_entr

from tabcds.errors import PreconditionError, SupportError
from tabcds.learning.behavior_policy import EmpiricalBehaviorPolicy, count_pairs
from tabcds.mdp.multitask_mdp import MultiTaskMdp, OccupancyMeasure, TabularPolicy
from tabcds.mdp.solvers import state_occupancy

logger = logging.getLogger(__name__)

KL_SMOOTHING = 1e-6
KL_FLOOR = -1e-12

Behavior = Union[EmpiricalBehaviorPolicy, TabularPolicy]


def d_cql(p, q) -> float:
    """
    D_CQL(p, q) = sum_x p(x) (p(x) / q(x) - 1).

    Raises:
        SupportError: if q(x) = 0 somewhere p(x) > 0
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise PreconditionError(f"need two vectors of equal length, got {p.shape} and {q.shape}")
    mask = p > 0
    if (q[mask] <= 0).any():
        raise SupportError(f"q has no mass at {np.flatnonzero(mask & (q <= 0)).tolist()} where p does")
    return float(np.sum(p[mask] * (p[mask] / q[mask] - 1.0)))


def d_cql_rows(p_rows: np.ndarray, q_rows: np.ndarray) -> np.ndarray:
    """Row-wise D_CQL over the last axis; inf for rows with a support violation."""
    p_rows = np.asarray(p_rows, dtype=np.float64)
    q_rows = np.asarray(q_rows, dtype=np.float64)
    mask = p_rows > 0
    violated = (mask & (q_rows <= 0)).any(axis=-1)
    ratio = np.divide(p_rows, q_rows, out=np.zeros_like(p_rows), where=mask & (q_rows > 0))
    out = np.sum(np.where(mask, p_rows * (ratio - 1.0), 0.0), axis=-1)
    return np.where(violated, np.inf, out)


def total_variation(p_rows: np.ndarray, q_rows: np.ndarray) -> np.ndarray:
    """Half L1 distance over the last axis."""
    return 0.5 * np.abs(np.asarray(p_rows, dtype=np.float64) - np.asarray(q_rows, dtype=np.float64)).sum(axis=-1)


def smooth_rows(behavior_rows: np.ndarray, policy_rows: np.ndarray, smoothing: float = KL_SMOOTHING) -> np.ndarray:
    """
    Mix uniform mass ``smoothing`` into rows where the policy leaves the
    behavior support; other rows are returned unchanged.
    """
    behavior_rows = np.asarray(behavior_rows, dtype=np.float64)
    num_actions = behavior_rows.shape[-1]
    leaves = ((policy_rows > 0) & (behavior_rows <= 0)).any(axis=-1, keepdims=True)
    smoothed = (1.0 - smoothing) * behavior_rows + smoothing / num_actions
    return np.where(leaves, smoothed, behavior_rows)


def behavior_rows(behavior: Behavior, task: int) -> np.ndarray:
    """(S, A) behavior distribution of ``task``; unobserved states are uniform."""
    if isinstance(behavior, EmpiricalBehaviorPolicy):
        behavior = behavior.as_policy()
    return behavior.for_task(task if behavior.num_tasks > 1 else 0)


def _policy_rows(policy: TabularPolicy, task: int) -> np.ndarray:
    return policy.for_task(task if policy.num_tasks > 1 else 0)


@dataclass(frozen=True, eq=False)
class DivergenceReport:
    """
    Occupancy-weighted KL(pi || pi_beta) for one task.

    Attributes:
        per_state: KL at every state
        weights: the state distribution the average is taken under
        smoothing: uniform mass mixed into behavior rows the policy leaves
        occupancy_source: "dataset" or "policy"
    """
    task: int
    average_kl: float
    per_state: np.ndarray
    weights: np.ndarray
    smoothing: float
    occupancy_source: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            'task': self.task,
            'average_kl': self.average_kl,
            'per_state': self.per_state.tolist(),
            'weights': self.weights.tolist(),
            'smoothing': self.smoothing,
            'occupancy_source': self.occupancy_source,
        }


def kl_policy_divergence(
    policy: TabularPolicy,
    behavior: Behavior,
    occupancy: OccupancyMeasure,
    task: int,
    smoothing: float = KL_SMOOTHING,
) -> DivergenceReport:
    """
    Average KL(pi(.|s) || pi_beta(.|s)) under the normalized ``occupancy``.

    Behavior rows the policy leaves are smoothed, so the result is finite.
    Occupancies over an extended state space (empirical MDPs) are cut to the
    policy's states.
    """
    pi = _policy_rows(policy, task)
    beta = smooth_rows(behavior_rows(behavior, task), pi, smoothing)
    if beta.shape != pi.shape:
        raise PreconditionError(f"policy {pi.shape} and behavior {beta.shape} disagree")
    per_state = rel_entr(pi, beta).sum(axis=-1)
    if (per_state < KL_FLOOR).any():
        raise PreconditionError("negative KL; rows are not distributions")
    per_state = np.clip(per_state, 0.0, None)
    weights = occupancy.normalized()[:pi.shape[0]]
    return DivergenceReport(task, float(weights @ per_state), per_state, weights, smoothing, occupancy.source)


def dataset_state_distribution(dataset, num_states: int) -> OccupancyMeasure:
    """Empirical state frequencies of ``dataset``."""
    if len(dataset) == 0:
        raise PreconditionError("state distribution of an empty dataset")
    counts = np.bincount(np.asarray(dataset.states, dtype=np.int64), minlength=num_states).astype(np.float64)
    return OccupancyMeasure(task=dataset.task, dist=counts / counts.sum(), source="dataset")


def policy_state_distribution(mdp: MultiTaskMdp, policy: TabularPolicy, task: int) -> OccupancyMeasure:
    return state_occupancy(mdp, policy, task)


def dataset_kl(policy: TabularPolicy, dataset, mdp: MultiTaskMdp, task: int, occupancy: str = "dataset",
               smoothing: float = KL_SMOOTHING) -> DivergenceReport:
    """
    KL between ``policy`` and the empirical behavior of ``dataset``.

    ``occupancy`` picks the weighting: the dataset's own state frequencies or
    the policy's discounted occupancy in ``mdp``.
    """
    counts = count_pairs(dataset.states, dataset.actions, mdp.num_states, mdp.num_actions)
    behavior = EmpiricalBehaviorPolicy.from_counts(counts[None])
    if occupancy == "dataset":
        weights = dataset_state_distribution(dataset, mdp.num_states)
    elif occupancy == "policy":
        weights = policy_state_distribution(mdp, policy, task)
    else:
        raise PreconditionError(f"unknown occupancy {occupancy!r}")
    report = kl_policy_divergence(policy, behavior, weights, task, smoothing)
    logger.debug("task %d KL under %s occupancy: %.6f", task, occupancy, report.average_kl)
    return DivergenceReport(task, report.average_kl, report.per_state, report.weights, smoothing, occupancy)

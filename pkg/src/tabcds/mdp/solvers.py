"""Exact dynamic-programming oracles: policy evaluation, value iteration, occupancies."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import linalg

from tabcds.errors import ConvergenceError, MdpValidationError
from tabcds.mdp.multitask_mdp import MultiTaskMdp, OccupancyMeasure, TabularPolicy

logger = logging.getLogger(__name__)

LINEAR_SOLVE_MAX_STATES = 500
ITERATIVE_TOLERANCE = 1e-10
MAX_ITERATIONS = 200_000
EVALUATION_METHODS = ("auto", "linear", "iterative")


def _check_policy(mdp: MultiTaskMdp, policy: TabularPolicy, task: int) -> np.ndarray:
    mdp.check_task(task)
    if policy.num_states != mdp.num_states or policy.num_actions != mdp.num_actions:
        raise MdpValidationError(
            f"policy shape {policy.probs.shape[1:]} does not match MDP ({mdp.num_states}, {mdp.num_actions})"
        )
    row = task if policy.num_tasks > 1 else 0
    if row >= policy.num_tasks:
        raise MdpValidationError(f"policy has no rows for task {task}")
    return policy.for_task(row)


def _resolve_method(mdp: MultiTaskMdp, method: str) -> str:
    if method not in EVALUATION_METHODS:
        raise ValueError(f"Unknown evaluation method: {method}")
    if method == "auto":
        return "linear" if mdp.num_states <= LINEAR_SOLVE_MAX_STATES else "iterative"
    return method


def policy_matrices(mdp: MultiTaskMdp, policy: TabularPolicy, task: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Markov chain of ``policy`` on ``task``.

    Returns:
        (P_pi, r_pi): continuation matrix with terminal rows zeroed, and expected one-step reward
    """
    pi = _check_policy(mdp, policy, task)
    continuing = (~mdp.terminal[task]).astype(np.float64)
    p_pi = np.einsum('sa,sat->st', pi, mdp.transition) * continuing[:, None]
    r_pi = np.einsum('sa,sa->s', pi, mdp.rewards[task])
    return p_pi, r_pi


def _iterate(operator, size: int, tol: float, discount: float, max_iterations: int, what: str) -> np.ndarray:
    # Stop once the contraction guarantees the fixed point is within tol.
    values = np.zeros(size)
    scale = discount / (1.0 - discount) if discount > 0 else 0.0
    for iteration in range(1, max_iterations + 1):
        updated = operator(values)
        delta = np.max(np.abs(updated - values)) if size else 0.0
        values = updated
        if delta * scale <= tol or delta == 0.0:
            logger.debug("%s converged after %d iterations", what, iteration)
            return values
    raise ConvergenceError(f"{what} did not reach {tol:g} within {max_iterations} iterations")


def policy_values(
    mdp: MultiTaskMdp,
    policy: TabularPolicy,
    task: int,
    method: str = "auto",
    tol: float = ITERATIVE_TOLERANCE,
    max_iterations: int = MAX_ITERATIONS,
) -> np.ndarray:
    """State values V^pi_i by linear solve or by fixed-point iteration."""
    p_pi, r_pi = policy_matrices(mdp, policy, task)
    gamma = mdp.discount
    if _resolve_method(mdp, method) == "linear":
        return linalg.solve(np.eye(mdp.num_states) - gamma * p_pi, r_pi)
    return _iterate(lambda v: r_pi + gamma * (p_pi @ v), mdp.num_states, tol, gamma, max_iterations,
                    "policy evaluation")


def policy_q_values(mdp: MultiTaskMdp, policy: TabularPolicy, task: int, method: str = "auto") -> np.ndarray:
    values = policy_values(mdp, policy, task, method=method)
    return backup(mdp, task, values)


def backup(mdp: MultiTaskMdp, task: int, values: np.ndarray) -> np.ndarray:
    """Expectation-exact Bellman backup R + gamma (1 - term) P V, shape (S, A)."""
    continuing = (~mdp.terminal[task]).astype(np.float64)
    return mdp.rewards[task] + mdp.discount * continuing[:, None] * (mdp.transition @ values)


def exact_policy_evaluation(
    mdp: MultiTaskMdp,
    policy: TabularPolicy,
    task: int,
    method: str = "auto",
    tol: float = ITERATIVE_TOLERANCE,
    max_iterations: int = MAX_ITERATIONS,
) -> float:
    """Expected discounted return J(pi) from ``initial_dist``."""
    values = policy_values(mdp, policy, task, method=method, tol=tol, max_iterations=max_iterations)
    return float(mdp.initial_dist @ values)


@dataclass(frozen=True)
class OptimalSolution:
    values: np.ndarray
    q_values: np.ndarray
    actions: np.ndarray

    @property
    def greedy(self) -> np.ndarray:
        """One-hot (S, A) greedy rows."""
        return np.eye(self.q_values.shape[1])[self.actions]


def value_iteration(
    mdp: MultiTaskMdp,
    task: int,
    tol: float = 1e-12,
    max_iterations: int = MAX_ITERATIONS,
) -> OptimalSolution:
    """Optimal values of one task; greedy ties go to the lowest action index."""
    mdp.check_task(task)

    def bellman(values: np.ndarray) -> np.ndarray:
        return backup(mdp, task, values).max(axis=1)

    values = _iterate(bellman, mdp.num_states, tol, mdp.discount, max_iterations, "value iteration")
    q_values = backup(mdp, task, values)
    return OptimalSolution(values=values, q_values=q_values, actions=np.argmax(q_values, axis=1))


def optimal_policy(mdp: MultiTaskMdp) -> TabularPolicy:
    """Greedy optimal policy for every task."""
    actions = np.stack([value_iteration(mdp, i).actions for i in range(mdp.num_tasks)])
    return TabularPolicy.deterministic(actions, mdp.num_actions)


def optimal_return(mdp: MultiTaskMdp, task: int) -> float:
    return float(mdp.initial_dist @ value_iteration(mdp, task).values)


def state_occupancy(
    mdp: MultiTaskMdp,
    policy: TabularPolicy,
    task: int,
    method: str = "auto",
    tol: float = ITERATIVE_TOLERANCE,
    max_iterations: int = MAX_ITERATIONS,
) -> OccupancyMeasure:
    """
    d(s) = (1 - gamma) sum_t gamma^t Pr(s_t = s, episode running).

    Mass removed by termination is reported separately, so
    ``sum_s d(s) * E_pi[R(s, .)] / (1 - gamma) == J(pi)``.
    """
    p_pi, _ = policy_matrices(mdp, policy, task)
    gamma = mdp.discount
    rho = mdp.initial_dist
    if _resolve_method(mdp, method) == "linear":
        visits = linalg.solve((np.eye(mdp.num_states) - gamma * p_pi).T, rho)
    else:
        visits = _iterate(lambda x: rho + gamma * (p_pi.T @ x), mdp.num_states, tol, gamma, max_iterations,
                          "occupancy")
    dist = np.clip((1.0 - gamma) * visits, 0.0, None)
    terminated = max(0.0, 1.0 - float(dist.sum()))
    return OccupancyMeasure(task=task, dist=dist, terminated_mass=terminated)

"""
Tabular CQL: penalized fitted Q iteration on per-task (effective) datasets.

Each sweep minimizes, per task and state,

    1/2 sum_a W(s,a) (Q(s,a) - y_bar(s,a))^2
        + beta * (W(s) E_{a~mu}[Q(s,a)] - sum_a W(s,a) Q(s,a))

where W are (CDS-weighted) pair masses and y_bar the weighted mean sample
backup r + gamma (1 - done) E_{a'~pi}[Q(s',a')] with the dataset's s'.
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp, softmax

from tabcds.learning.config import LearnerConfig, LearnerKind, MuMode
from tabcds.learning.fitting import (
    bootstrap_values, check_divergence, pair_statistics, q_cap, q_floor, stratified_batch, task_columns,
)
from tabcds.learning.q_table import ConservativeQTable, extract_policy
from tabcds.mdp.multitask_mdp import ProblemShape, TabularPolicy

logger = logging.getLogger(__name__)

_STEP_SIZES = 0.5 ** np.arange(31)
_ARMIJO = 1e-4
_GRAD_TOL = 1e-10
_NEWTON_REGION = 1e-6


def penalty_distribution(q_task: np.ndarray, mode: MuMode, temperature: float,
                         policy_task: Optional[np.ndarray], behavior_task: np.ndarray) -> np.ndarray:
    """mu(a | s) for one task."""
    if mode is MuMode.UNIFORM:
        return np.full(q_task.shape, 1.0 / q_task.shape[1])
    if mode is MuMode.SOFTMAX:
        return softmax(q_task / temperature, axis=1)
    if mode is MuMode.CURRENT_POLICY:
        return policy_task
    return behavior_task


def cql_penalty(q_task: np.ndarray, mass: np.ndarray, mu: np.ndarray) -> float:
    """E_{s~D, a~mu}[Q] - E_{(s,a)~D}[Q] under pair masses ``mass``."""
    total = mass.sum()
    if total <= 0:
        return 0.0
    state_mass = mass.sum(axis=1)
    pushed_down = np.sum(state_mass * np.einsum('sa,sa->s', mu, q_task))
    pushed_up = np.sum(mass * q_task)
    return float((pushed_down - pushed_up) / total)


def _closed_form(ybar: np.ndarray, freq: np.ndarray, mu: np.ndarray, beta: float) -> np.ndarray:
    # Minimizer for fixed mu: y_bar - beta (mu / pi_beta - 1) on observed pairs.
    solution = np.zeros_like(ybar)
    observed = freq > 0
    ratio = np.zeros_like(ybar)
    np.divide(mu, freq, out=ratio, where=observed)
    solution[observed] = (ybar - beta * (ratio - 1.0))[observed]
    return solution


def _softmax_objective(x, ybar, freq, observed, beta, temperature):
    fit = 0.5 * np.sum(np.where(observed, freq * (x - ybar) ** 2, 0.0), axis=1)
    lse = temperature * logsumexp(x / temperature, axis=1)
    return fit + beta * (lse - np.sum(np.where(observed, freq * x, 0.0), axis=1))


def _softmax_solve(x0: np.ndarray, ybar: np.ndarray, freq: np.ndarray, beta: float, temperature: float,
                   steps: int) -> np.ndarray:
    """
    Damped Newton on the log-sum-exp penalty, one independent problem per row.

    Unobserved actions enter the normalizer at their current values and are
    not optimized; the observed block is strictly convex. A row leaves the
    iteration once its gradient is below ``_GRAD_TOL`` or, away from the
    optimum, the line search can no longer decrease its objective.
    """
    x = x0.copy()
    eye = np.eye(x.shape[1])
    active = np.arange(len(x))
    for _ in range(steps):
        xa, ya, fa = x[active], ybar[active], freq[active]
        observed = fa > 0
        mu = softmax(xa / temperature, axis=1)
        grad = np.where(observed, fa * (xa - ya) + beta * (mu - fa), 0.0)
        moving = np.max(np.abs(grad), axis=1) >= _GRAD_TOL
        if not moving.any():
            break
        active, xa, ya, fa, observed, mu, grad = (
            v[moving] for v in (active, xa, ya, fa, observed, mu, grad))
        curvature = (beta / temperature) * (mu[:, :, None] * eye - mu[:, :, None] * mu[:, None, :])
        hessian = fa[:, :, None] * eye + curvature
        pair_mask = observed[:, :, None] & observed[:, None, :]
        hessian = np.where(pair_mask, hessian, 0.0) + np.where(observed, 0.0, 1.0)[:, :, None] * eye
        direction = -np.linalg.solve(hessian, grad[:, :, None])[:, :, 0]
        slope = np.sum(grad * direction, axis=1)
        current = _softmax_objective(xa, ya, fa, observed, beta, temperature)
        chosen = np.zeros(len(xa))
        pending = np.ones(len(xa), dtype=bool)
        for t in _STEP_SIZES:
            trial = _softmax_objective(xa + t * direction, ya, fa, observed, beta, temperature)
            accept = pending & (trial <= current + _ARMIJO * t * slope)
            chosen[accept] = t
            pending &= ~accept
            if not pending.any():
                break
        # Objective differences drown in rounding near the optimum; take the plain Newton step there.
        chosen[pending & (np.max(np.abs(grad), axis=1) < _NEWTON_REGION)] = 1.0
        x[active] = xa + chosen[:, None] * direction
        active = active[chosen > 0]
        if len(active) == 0:
            break
    return x


def cql_sweep(
    q_task: np.ndarray,
    mass: np.ndarray,
    ybar: np.ndarray,
    config: LearnerConfig,
    policy_task: Optional[np.ndarray] = None,
    floor: float = -np.inf,
) -> np.ndarray:
    """
    One sweep for one task.

    Observed pairs move toward the sweep minimizer; unobserved actions at
    observed states take the gradient step -beta * mu, clipped from below at
    ``floor``; unseen states keep their values.
    """
    state_mass = mass.sum(axis=1)
    seen = state_mass > 0
    if not seen.any():
        return q_task.copy()
    freq = np.zeros_like(mass)
    np.divide(mass, state_mass[:, None], out=freq, where=seen[:, None])
    beta = config.beta

    if config.mu_mode is MuMode.SOFTMAX and beta > 0:
        solution = q_task.copy()
        solution[seen] = _softmax_solve(q_task[seen], ybar[seen], freq[seen], beta, config.mu_temperature,
                                        config.newton_steps)
        mu = softmax(solution / config.mu_temperature, axis=1)
    else:
        mu = penalty_distribution(q_task, config.mu_mode, config.mu_temperature, policy_task, freq)
        solution = _closed_form(ybar, freq, mu, beta)

    unobserved = seen[:, None] & (mass <= 0)
    solution = np.where(unobserved, np.maximum(q_task - beta * mu, floor), solution)
    updated = q_task.copy()
    step = config.learning_rate
    updated[seen] = q_task[seen] + step * (solution[seen] - q_task[seen])
    return updated


def cql_fitted_iteration(
    datasets: Sequence,
    config: LearnerConfig,
    shape: ProblemShape,
    weights: Optional[Sequence[np.ndarray]] = None,
    initial: Optional[np.ndarray] = None,
    policy: Optional[TabularPolicy] = None,
    policy_weights: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
    sweeps: Optional[int] = None,
) -> ConservativeQTable:
    """
    Run ``sweeps`` (default ``config.iterations``) CQL sweeps.

    Args:
        datasets: one TaskDataset or EffectiveDataset per task
        config: learner hyperparameters
        shape: state/action counts, discount and R_max
        weights: optional per-transition weights overriding the datasets' own
        initial: warm-start Q table (N, S, A)
        policy: fixed policy for the backups (conservative policy evaluation);
            by default the policy is re-extracted from Q before every sweep
        policy_weights: per-pair weights applied inside policy extraction
        rng: generator for stratified batches

    Raises:
        LearnerDivergenceError: if any |Q| exceeds the value cap
    """
    columns = task_columns(datasets, weights)
    num_tasks = len(columns)
    rng = rng if rng is not None else np.random.default_rng(0)
    q = np.zeros((num_tasks, shape.num_states, shape.num_actions)) if initial is None else np.array(initial, dtype=np.float64)
    cap = q_cap(shape, config.beta, config.q_cap_margin)
    floor = q_floor(shape, config.beta)
    sweeps = config.iterations if sweeps is None else sweeps

    for sweep in range(1, sweeps + 1):
        current = policy if policy is not None else extract_policy(q, config.policy_temperature, policy_weights)
        updated = np.empty_like(q)
        for task, full in enumerate(columns):
            data = full if config.batch_size_per_task == 0 else stratified_batch(full, config.batch_size_per_task, rng)
            pi = current.for_task(task)
            targets = data.rewards + shape.discount * (~data.dones) * bootstrap_values(q[task], pi)[data.next_states]
            mass, ybar = pair_statistics(data, targets, shape.num_states, shape.num_actions)
            updated[task] = cql_sweep(q[task], mass, ybar, config, pi, floor)
        q = updated
        check_divergence(q, cap, sweep, "CQL")
    logger.debug("CQL finished %d sweeps, max |Q| = %.4f", sweeps, float(np.abs(q).max()))
    return ConservativeQTable(q=q, beta=config.beta, alpha=config.alpha, mu_mode=config.mu_mode,
                              learner=LearnerKind.CQL)

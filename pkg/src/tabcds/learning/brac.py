"""
BRAC-style fitted Q iteration: the sample backup is penalized by the policy's
KL divergence from the empirical behavior policy at the successor state.
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import rel_entr

from tabcds.learning.config import LearnerConfig, LearnerKind
from tabcds.learning.fitting import (
    bootstrap_values, check_divergence, pair_statistics, q_cap, stratified_batch, task_columns,
)
from tabcds.learning.q_table import ConservativeQTable, extract_policy
from tabcds.mdp.multitask_mdp import ProblemShape, TabularPolicy
from tabcds.utils.notification_manager import NotificationManager, NotificationType

logger = logging.getLogger(__name__)


def clamped_kl(policy_task: np.ndarray, behavior_task: np.ndarray, observed: np.ndarray,
               kl_max: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    KL(pi(.|s) || pi_beta(.|s)) per state, clamped at ``kl_max``.

    States without behavior data, or where pi puts mass outside the behavior
    support, are set to ``kl_max`` and flagged.
    """
    outside = ((policy_task > 0) & (behavior_task <= 0)).any(axis=1)
    clamped = ~observed | outside
    with np.errstate(divide='ignore', invalid='ignore'):
        kl = rel_entr(policy_task, behavior_task).sum(axis=1)
    kl = np.where(clamped, kl_max, np.minimum(np.maximum(kl, 0.0), kl_max))
    clamped |= kl >= kl_max
    return kl, clamped


def _support_policy(q: np.ndarray, temperature: float, behavior: np.ndarray,
                    weights: Optional[np.ndarray]) -> TabularPolicy:
    # Restrict to the behavior support wherever the state was observed.
    return extract_policy(q, temperature, weights, support=behavior > 0)


def brac_fitted_iteration(
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
    Fitted Q iteration with targets r - alpha KL(s') + gamma (1 - done) E_pi[Q(s')].

    The KL term is dropped on terminal transitions. The returned table's
    ``conservative_values`` are Q(s, a) - alpha KL(pi(.|s) || pi_beta(.|s)).
    """
    columns = task_columns(datasets, weights)
    num_tasks = len(columns)
    rng = rng if rng is not None else np.random.default_rng(0)
    num_states, num_actions = shape.num_states, shape.num_actions

    behavior = np.zeros((num_tasks, num_states, num_actions))
    observed = np.zeros((num_tasks, num_states), dtype=bool)
    for task, col in enumerate(columns):
        mass, _ = pair_statistics(col, np.zeros(len(col)), num_states, num_actions)
        totals = mass.sum(axis=1)
        observed[task] = totals > 0
        np.divide(mass, totals[:, None], out=behavior[task], where=observed[task][:, None])

    q = np.zeros((num_tasks, num_states, num_actions)) if initial is None else np.array(initial, dtype=np.float64)
    cap = q_cap(shape, config.alpha * config.kl_max, config.q_cap_margin)
    sweeps = config.iterations if sweeps is None else sweeps
    kl = np.zeros((num_tasks, num_states))
    clamped = np.zeros((num_tasks, num_states), dtype=bool)

    for sweep in range(1, sweeps + 1):
        current = policy if policy is not None else _support_policy(q, config.policy_temperature, behavior,
                                                                    policy_weights)
        updated = q.copy()
        for task, full in enumerate(columns):
            pi = current.for_task(task)
            kl[task], clamped[task] = clamped_kl(pi, behavior[task], observed[task], config.kl_max)
            data = full if config.batch_size_per_task == 0 else stratified_batch(full, config.batch_size_per_task, rng)
            continuing = ~data.dones
            successor = bootstrap_values(q[task], pi)[data.next_states]
            penalty = config.alpha * kl[task][data.next_states]
            targets = data.rewards + continuing * (shape.discount * successor - penalty)
            mass, ybar = pair_statistics(data, targets, num_states, num_actions)
            seen = mass > 0
            updated[task][seen] = q[task][seen] + config.learning_rate * (ybar[seen] - q[task][seen])
        q = updated
        check_divergence(q, cap, sweep, "BRAC")

    final = policy if policy is not None else _support_policy(q, config.policy_temperature, behavior, policy_weights)
    for task in range(num_tasks):
        kl[task], clamped[task] = clamped_kl(final.for_task(task), behavior[task], observed[task], config.kl_max)
    touched = clamped & observed
    if config.alpha > 0 and touched.any():
        NotificationManager.notify(
            f"BRAC clamped KL at {int(touched.sum())} observed states to {config.kl_max}", NotificationType.WARNING)
    logger.debug("BRAC finished %d sweeps, %d clamped states", sweeps, int(clamped.sum()))
    return ConservativeQTable(q=q, beta=config.beta, alpha=config.alpha, mu_mode=config.mu_mode,
                              learner=LearnerKind.BRAC, kl=kl.copy(), kl_clamped=clamped.copy())

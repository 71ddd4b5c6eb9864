"""Multi-task training loop alternating effective-dataset construction and learner sweeps."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from tabcds.analysis.divergences import dataset_kl
from tabcds.data.transitions import TaskDataset
from tabcds.errors import PreconditionError
from tabcds.learning.behavior_policy import estimate_behavior_policy
from tabcds.learning.brac import brac_fitted_iteration
from tabcds.learning.config import LearnerConfig, LearnerKind
from tabcds.learning.cql import cql_fitted_iteration
from tabcds.learning.q_table import ConservativeQTable, extract_policy
from tabcds.mdp.multitask_mdp import MultiTaskMdp, TabularPolicy
from tabcds.mdp.solvers import exact_policy_evaluation, optimal_policy
from tabcds.sharing.effective_dataset import AdmissionTable, EffectiveDataset, build_effective_dataset
from tabcds.sharing.strategies import SharingStrategy, StrategyKind
from tabcds.sharing.weights import AdaptiveTemperature, update_temperature
from tabcds.utils.notification_manager import NotificationManager, NotificationType

logger = logging.getLogger(__name__)

LOG_COLUMNS = ["round", "task", "dataset_size", "admitted_fraction", "J_eval", "kl_div"]


@dataclass(frozen=True, eq=False)
class TrainingResult:
    q_table: ConservativeQTable
    policy: TabularPolicy
    log: pd.DataFrame
    effective: List[EffectiveDataset]
    admissions: List[AdmissionTable]
    temperature: Optional[AdaptiveTemperature] = None
    returns: List[float] = field(default_factory=list)
    kl: List[float] = field(default_factory=list)

    def admissions_frame(self) -> pd.DataFrame:
        frames = [table.to_frame() for table in self.admissions if len(table)]
        if not frames:
            return AdmissionTable(0, *(np.zeros(0),) * 4, np.zeros(0, dtype=bool)).to_frame()
        return pd.concat(frames, ignore_index=True)


def pair_weights(effective: Sequence[EffectiveDataset], num_states: int, num_actions: int) -> np.ndarray:
    """Mean CDS weight of the data at each (task, s, a); 1 where there is none."""
    out = np.ones((len(effective), num_states, num_actions))
    for task, data in enumerate(effective):
        index = data.states * num_actions + data.actions
        mass = np.bincount(index, minlength=num_states * num_actions)
        total = np.bincount(index, weights=data.weights, minlength=num_states * num_actions)
        mean = out[task].reshape(-1)
        np.divide(total, mass, out=mean, where=mass > 0)
        out[task] = mean.reshape(num_states, num_actions)
    return out


def _fit(effective, config, mdp, initial, policy_weights, rng, sweeps) -> ConservativeQTable:
    learner = brac_fitted_iteration if config.learner is LearnerKind.BRAC else cql_fitted_iteration
    return learner(effective, config, mdp.shape, initial=initial, policy_weights=policy_weights, rng=rng,
                   sweeps=sweeps)


def _current_policy(q: ConservativeQTable, config: LearnerConfig, effective, mdp, weights) -> TabularPolicy:
    if config.learner is LearnerKind.BRAC:
        behavior = estimate_behavior_policy(effective, mdp.num_states, mdp.num_actions)
        return extract_policy(q, config.policy_temperature, weights, support=behavior.counts > 0)
    return extract_policy(q, config.policy_temperature, weights)


def train_multitask(
    mdp: MultiTaskMdp,
    datasets: Sequence[TaskDataset],
    strategy: SharingStrategy,
    config: LearnerConfig,
    seed: int,
    kl_occupancy: str = "dataset",
    reference: Optional[TabularPolicy] = None,
) -> TrainingResult:
    """
    Round 0 fits Q-hat on each task's own data for ``rebuild_every`` sweeps.
    Every later round rebuilds each D_i^eff from the current Q-hat and policy
    through ``strategy``, then runs another ``rebuild_every`` sweeps warm-started
    from the previous table. The log has one row per (round, task); its KL
    compares ``reference`` (the single-task optimal policies by default) with
    the empirical behavior of each effective dataset.
    """
    if len(datasets) != mdp.num_tasks:
        raise PreconditionError(f"{len(datasets)} datasets for {mdp.num_tasks} tasks")
    rng = np.random.default_rng(seed)
    reference = reference if reference is not None else optimal_policy(mdp)
    temperature = None
    if strategy.kind is StrategyKind.CDS_WEIGHTED:
        temperature = AdaptiveTemperature.initial(mdp.num_tasks, strategy.tau_min, strategy.tau_max, strategy.decay)
    soft = strategy.kind is StrategyKind.CDS_WEIGHTED

    effective = [EffectiveDataset.from_task_dataset(d) for d in datasets]
    admissions: List[AdmissionTable] = []
    rows = []
    q: Optional[ConservativeQTable] = None
    policy: Optional[TabularPolicy] = None
    weights = None

    for round_index in range(config.rounds + 1):
        if round_index > 0:
            effective, admissions = [], []
            for task in range(mdp.num_tasks):
                built = build_effective_dataset(strategy, q, policy, datasets, task, mdp, temperature,
                                                config.weight_rule, rng)
                effective.append(built)
                admissions.append(built.admissions)
                if temperature is not None:
                    candidate_deltas = built.admissions.deltas
                    before = temperature.tau(task)
                    temperature = update_temperature(temperature, candidate_deltas[np.isfinite(candidate_deltas)],
                                                     task)
                    after = temperature.tau(task)
                    if after != before and after in (temperature.tau_min, temperature.tau_max):
                        NotificationManager.notify(
                            f"temperature of task {task} clipped to {temperature.tau(task):g}", NotificationType.WARNING)
            weights = pair_weights(effective, mdp.num_states, mdp.num_actions) if soft else None
        q = _fit(effective, config, mdp, None if q is None else q.q, weights, rng, config.rebuild_every)
        policy = _current_policy(q, config, effective, mdp, weights)

        returns, divergences = [], []
        for task in range(mdp.num_tasks):
            value = exact_policy_evaluation(mdp, policy, task)
            returns.append(value)
            kl = dataset_kl(reference, effective[task], mdp, task, occupancy=kl_occupancy).average_kl
            divergences.append(kl)
            table = admissions[task] if admissions else None
            rows.append({
                'round': round_index,
                'task': task,
                'dataset_size': len(effective[task]),
                'admitted_fraction': table.admitted_fraction if table is not None else 0.0,
                'J_eval': value,
                'kl_div': kl,
            })
        NotificationManager.notify(
            f"{strategy.tag} round {round_index}: J = " + ", ".join(f"{r:.4f}" for r in returns),
            NotificationType.OK,
        )

    log = pd.DataFrame(rows, columns=LOG_COLUMNS)
    return TrainingResult(q_table=q, policy=policy, log=log, effective=effective, admissions=admissions,
                          temperature=temperature, returns=returns, kl=divergences)

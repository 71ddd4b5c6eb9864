"""Construction of D_i^eff = D_i plus admitted relabeled transitions from other tasks."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from tabcds.data.relabeling import relabel_dataset
from tabcds.data.transitions import DatasetManifest, TaskDataset
from tabcds.errors import PreconditionError
from tabcds.learning.config import WeightRule
from tabcds.learning.q_table import ConservativeQTable
from tabcds.mdp.multitask_mdp import MultiTaskMdp, TabularPolicy
from tabcds.sharing.rules import basic_deltas, hipi_routes, quantile_deltas, skill_route
from tabcds.sharing.strategies import SharingStrategy, StrategyKind
from tabcds.sharing.weights import AdaptiveTemperature, cds_weight

logger = logging.getLogger(__name__)

ADMISSION_COLUMNS = ["transition_index", "origin", "target", "delta", "weight", "admitted"]


@dataclass(frozen=True, eq=False)
class AdmissionTable:
    """Decision for every relabeled candidate considered for one target task."""
    target: int
    origins: np.ndarray
    indices: np.ndarray
    deltas: np.ndarray
    weights: np.ndarray
    admitted: np.ndarray

    def __len__(self) -> int:
        return len(self.origins)

    @property
    def admitted_fraction(self) -> float:
        """Share of candidates admitted; the mean weight for soft admission."""
        if len(self) == 0:
            return 0.0
        return float(np.sum(self.weights * self.admitted) / len(self))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'transition_index': self.indices.astype(np.int64),
            'origin': self.origins.astype(np.int64),
            'target': np.full(len(self), self.target, dtype=np.int64),
            'delta': self.deltas,
            'weight': self.weights,
            'admitted': self.admitted.astype(bool),
        }, columns=ADMISSION_COLUMNS)


@dataclass(frozen=True, eq=False)
class EffectiveDataset:
    """
    Post-sharing dataset of one task.

    Rewards and done flags are those of ``task``; ``origins`` and
    ``source_index`` locate each transition in its original dataset;
    ``weights`` are 1 under hard admission.
    """
    task: int
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray
    origins: np.ndarray
    source_index: np.ndarray
    weights: np.ndarray
    admissions: Optional[AdmissionTable] = None

    def __len__(self) -> int:
        return len(self.states)

    @property
    def original_mask(self) -> np.ndarray:
        return self.origins == self.task

    @property
    def num_original(self) -> int:
        return int(self.original_mask.sum())

    def as_task_dataset(self, manifest: DatasetManifest) -> TaskDataset:
        return TaskDataset(self.task, self.states, self.actions, self.rewards, self.next_states, self.dones,
                           self.origins, DatasetManifest(manifest.quality, manifest.seed, manifest.behavior, len(self)))

    @classmethod
    def from_task_dataset(cls, dataset: TaskDataset) -> "EffectiveDataset":
        n = len(dataset)
        return cls(dataset.task, dataset.states, dataset.actions, dataset.rewards, dataset.next_states,
                   dataset.dones, dataset.origins, np.arange(n), np.ones(n))


def _needs_q(strategy: SharingStrategy) -> bool:
    return strategy.kind in (StrategyKind.HIPI, StrategyKind.CDS_BASIC, StrategyKind.CDS_QUANTILE,
                             StrategyKind.CDS_WEIGHTED)


def _decide(strategy, q, policy, original, candidate: TaskDataset, origin: int, target: int, temperature):
    n = len(candidate)
    deltas = np.full(n, np.nan)
    weights = np.ones(n)
    kind = strategy.kind
    if kind is StrategyKind.NO_SHARE:
        admitted = np.zeros(n, dtype=bool)
    elif kind is StrategyKind.SHARE_ALL:
        admitted = np.ones(n, dtype=bool)
    elif kind is StrategyKind.SKILL:
        admitted = np.full(n, skill_route(strategy.skill_tags, origin, target))
    elif kind is StrategyKind.HIPI:
        admitted = hipi_routes(q, candidate.states, candidate.actions) == target
    elif kind is StrategyKind.CDS_BASIC:
        deltas = basic_deltas(q, policy, candidate.states, candidate.actions, target, original)
        admitted = deltas >= 0
    else:
        deltas = quantile_deltas(q, candidate.states, candidate.actions, target, original, strategy.k)
        if kind is StrategyKind.CDS_QUANTILE:
            admitted = deltas >= 0
        else:
            weights = np.atleast_1d(cds_weight(deltas, temperature, target)) if n else weights
            admitted = np.ones(n, dtype=bool)
    return deltas, weights, admitted


def build_effective_dataset(
    strategy: SharingStrategy,
    q: Optional[ConservativeQTable],
    policy: Optional[TabularPolicy],
    datasets: Sequence[TaskDataset],
    target: int,
    mdp: MultiTaskMdp,
    temperature: Optional[AdaptiveTemperature] = None,
    weight_rule: WeightRule = WeightRule.RELABELED_ONLY,
    rng: Optional[np.random.Generator] = None,
) -> EffectiveDataset:
    """
    Apply ``strategy`` to every candidate in the union of D_{j -> target}.

    D_target is always included. Weighted CDS keeps every candidate with
    weight sigma(Delta / tau); under ``relabeled-plus-50%-original`` the
    original data is weighted too with probability one half, decided by ``rng``.
    """
    mdp.check_task(target)
    if len(datasets) != mdp.num_tasks:
        raise PreconditionError(f"{len(datasets)} datasets for {mdp.num_tasks} tasks")
    if _needs_q(strategy) and q is None:
        raise PreconditionError(f"{strategy.tag} needs a Q table")
    if strategy.kind is StrategyKind.CDS_BASIC and policy is None:
        raise PreconditionError("CdsBasic needs the current policy")
    if strategy.kind is StrategyKind.CDS_WEIGHTED and temperature is None:
        raise PreconditionError("CdsWeighted needs an adaptive temperature")

    original = datasets[target]
    own_weights = np.ones(len(original))
    if strategy.kind is StrategyKind.CDS_WEIGHTED and weight_rule is WeightRule.RELABELED_PLUS_HALF_ORIGINAL:
        rng = rng if rng is not None else np.random.default_rng(0)
        if rng.random() < 0.5 and len(original):
            own_deltas = quantile_deltas(q, original.states, original.actions, target, original, strategy.k)
            own_weights = np.atleast_1d(cds_weight(own_deltas, temperature, target))

    parts: List[TaskDataset] = [original]
    part_weights = [own_weights]
    part_index = [np.arange(len(original))]
    origins, indices, deltas, weights, admitted = [], [], [], [], []
    for origin, source in enumerate(datasets):
        if origin == target or len(source) == 0:
            continue
        candidate = relabel_dataset(source, target, mdp)
        d, w, keep = _decide(strategy, q, policy, original, candidate, origin, target, temperature)
        origins.append(np.full(len(candidate), origin))
        indices.append(np.arange(len(candidate)))
        deltas.append(d)
        weights.append(w)
        admitted.append(keep)
        if keep.any():
            chosen = np.flatnonzero(keep)
            parts.append(candidate)
            part_weights.append(w[chosen])
            part_index.append(chosen)

    def stack(arrays, dtype):
        return np.concatenate(arrays).astype(dtype) if arrays else np.zeros(0, dtype=dtype)

    admissions = AdmissionTable(
        target=target,
        origins=stack(origins, np.int64),
        indices=stack(indices, np.int64),
        deltas=stack(deltas, np.float64),
        weights=stack(weights, np.float64),
        admitted=stack(admitted, bool),
    )
    effective = EffectiveDataset(
        task=target,
        states=np.concatenate([p.states[i] for p, i in zip(parts, part_index)]),
        actions=np.concatenate([p.actions[i] for p, i in zip(parts, part_index)]),
        rewards=np.concatenate([p.rewards[i] for p, i in zip(parts, part_index)]),
        next_states=np.concatenate([p.next_states[i] for p, i in zip(parts, part_index)]),
        dones=np.concatenate([p.dones[i] for p, i in zip(parts, part_index)]),
        origins=np.concatenate([p.origins[i] for p, i in zip(parts, part_index)]),
        source_index=np.concatenate(part_index),
        weights=np.concatenate(part_weights),
        admissions=admissions,
    )
    logger.debug("%s -> task %d: %d original + %d shared", strategy.tag, target, len(original),
                 len(effective) - len(original))
    return effective


def build_all(strategy, q, policy, datasets, mdp, temperature=None, weight_rule=WeightRule.RELABELED_ONLY,
              rng=None) -> List[EffectiveDataset]:
    return [build_effective_dataset(strategy, q, policy, datasets, i, mdp, temperature, weight_rule, rng)
            for i in range(mdp.num_tasks)]

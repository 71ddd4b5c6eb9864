"""Transitions, trajectories and per-task datasets."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from tabcds.errors import DatasetFormatError


class DatasetQuality(str, Enum):
    EXPERT = "expert"
    MEDIUM = "medium"
    MEDIUM_REPLAY = "medium-replay"
    UNDIRECTED_SPLIT = "undirected-split"
    DIRECTED_SPLIT = "directed-split"


@dataclass(frozen=True)
class Transition:
    s: int
    a: int
    r: float
    s_next: int
    done: bool
    origin_task: int


@dataclass(frozen=True)
class DatasetManifest:
    quality: DatasetQuality
    seed: int
    behavior: str
    size: int

    def to_dict(self) -> Dict[str, Any]:
        return {'quality': self.quality.value, 'seed': int(self.seed), 'behavior': self.behavior, 'size': int(self.size)}

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "DatasetManifest":
        try:
            return cls(DatasetQuality(payload['quality']), int(payload['seed']), str(payload['behavior']),
                       int(payload['size']))
        except (KeyError, ValueError) as exc:
            raise DatasetFormatError(f"invalid dataset manifest: {exc}") from exc


def _column(values: Iterable, dtype) -> np.ndarray:
    out = np.array(list(values) if not isinstance(values, np.ndarray) else values, dtype=dtype)
    out = out.reshape(-1)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class TaskDataset:
    """
    Transitions collected for (or assigned to) one task, stored column-wise.

    ``origins`` is the task whose data a transition originally was; it is
    the provenance tag carried through relabeling.
    """
    task: int
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray
    origins: np.ndarray
    manifest: DatasetManifest

    def __post_init__(self):
        object.__setattr__(self, 'states', _column(self.states, np.int64))
        object.__setattr__(self, 'actions', _column(self.actions, np.int64))
        object.__setattr__(self, 'rewards', _column(self.rewards, np.float64))
        object.__setattr__(self, 'next_states', _column(self.next_states, np.int64))
        object.__setattr__(self, 'dones', _column(self.dones, bool))
        object.__setattr__(self, 'origins', _column(self.origins, np.int64))
        n = len(self.states)
        if any(len(col) != n for col in (self.actions, self.rewards, self.next_states, self.dones, self.origins)):
            raise DatasetFormatError("dataset columns have different lengths")
        if self.manifest.size != n:
            raise DatasetFormatError(f"manifest size {self.manifest.size} != transition count {n}")

    def __len__(self) -> int:
        return len(self.states)

    def transition(self, index: int) -> Transition:
        return Transition(
            s=int(self.states[index]),
            a=int(self.actions[index]),
            r=float(self.rewards[index]),
            s_next=int(self.next_states[index]),
            done=bool(self.dones[index]),
            origin_task=int(self.origins[index]),
        )

    @property
    def transitions(self) -> List[Transition]:
        return [self.transition(j) for j in range(len(self))]

    @classmethod
    def from_transitions(
        cls,
        task: int,
        transitions: Sequence[Transition],
        quality: DatasetQuality,
        seed: int,
        behavior: str,
    ) -> "TaskDataset":
        manifest = DatasetManifest(quality, seed, behavior, len(transitions))
        return cls(
            task=task,
            states=[t.s for t in transitions],
            actions=[t.a for t in transitions],
            rewards=[t.r for t in transitions],
            next_states=[t.s_next for t in transitions],
            dones=[t.done for t in transitions],
            origins=[t.origin_task for t in transitions],
            manifest=manifest,
        )

    def head(self, size: int) -> "TaskDataset":
        manifest = DatasetManifest(self.manifest.quality, self.manifest.seed, self.manifest.behavior, min(size, len(self)))
        return TaskDataset(self.task, self.states[:size], self.actions[:size], self.rewards[:size],
                           self.next_states[:size], self.dones[:size], self.origins[:size], manifest)

    def with_manifest(self, manifest: DatasetManifest) -> "TaskDataset":
        return TaskDataset(self.task, self.states, self.actions, self.rewards, self.next_states, self.dones,
                           self.origins, manifest)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Reward-free state/action sequence; rewards come from whichever task it is assigned to."""
    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'states', _column(self.states, np.int64))
        object.__setattr__(self, 'actions', _column(self.actions, np.int64))
        object.__setattr__(self, 'next_states', _column(self.next_states, np.int64))
        if not (len(self.states) == len(self.actions) == len(self.next_states)):
            raise DatasetFormatError("trajectory columns have different lengths")

    def __len__(self) -> int:
        return len(self.states)

    @property
    def final_state(self) -> Optional[int]:
        return int(self.next_states[-1]) if len(self) else None


def concatenate_trajectories(trajectories: Sequence[Trajectory]):
    """Stack trajectories into (states, actions, next_states) columns."""
    if not trajectories:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty
    return (
        np.concatenate([t.states for t in trajectories]),
        np.concatenate([t.actions for t in trajectories]),
        np.concatenate([t.next_states for t in trajectories]),
    )

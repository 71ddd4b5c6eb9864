"""Tabular multi-task MDP, task-conditioned policies and occupancy measures."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from tabcds.errors import MdpValidationError

ROW_TOLERANCE = 1e-12
OCCUPANCY_TOLERANCE = 1e-10
MDP_FORMAT = "tabcds-mdp"
MDP_FORMAT_VERSION = 1


def _frozen(array: Any, dtype) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ProblemShape:
    """What a learner needs to know about the world without seeing its model."""
    num_states: int
    num_actions: int
    discount: float
    r_max: float


@dataclass(frozen=True, eq=False)
class MultiTaskMdp:
    """
    Shared dynamics with one reward table per task.

    Attributes:
        transition: (S, A, S) next-state probabilities
        rewards: (N, S, A) rewards per task
        discount: gamma in [0, 1)
        initial_dist: (S,) start distribution
        terminal: (N, S) bool, episode ends after acting in a terminal state
        task_names: optional labels, one per task
        coords: optional (S, 2) integer cell coordinates used by goal splits and rendering
    """
    transition: np.ndarray
    rewards: np.ndarray
    discount: float
    initial_dist: np.ndarray
    terminal: np.ndarray
    task_names: Tuple[str, ...] = ()
    coords: Optional[np.ndarray] = None

    def __post_init__(self):
        transition = _frozen(self.transition, np.float64)
        rewards = _frozen(self.rewards, np.float64)
        initial = _frozen(self.initial_dist, np.float64)
        terminal = _frozen(self.terminal, bool)
        if transition.ndim != 3 or transition.shape[0] != transition.shape[2]:
            raise MdpValidationError(f"transition must have shape (S, A, S), got {transition.shape}")
        num_states, num_actions = transition.shape[:2]
        if rewards.ndim != 3 or rewards.shape[1:] != (num_states, num_actions):
            raise MdpValidationError(f"rewards must have shape (N, {num_states}, {num_actions}), got {rewards.shape}")
        num_tasks = rewards.shape[0]
        if num_states < 1 or num_actions < 1 or num_tasks < 1:
            raise MdpValidationError("MDP needs at least one state, action and task")
        if initial.shape != (num_states,):
            raise MdpValidationError(f"initial_dist must have shape ({num_states},), got {initial.shape}")
        if terminal.shape != (num_tasks, num_states):
            raise MdpValidationError(f"terminal must have shape ({num_tasks}, {num_states}), got {terminal.shape}")
        names = tuple(str(n) for n in self.task_names) or tuple(f"task{i}" for i in range(num_tasks))
        if len(names) != num_tasks:
            raise MdpValidationError(f"expected {num_tasks} task names, got {len(names)}")
        coords = None
        if self.coords is not None:
            coords = _frozen(self.coords, np.int64)
            if coords.shape != (num_states, 2):
                raise MdpValidationError(f"coords must have shape ({num_states}, 2), got {coords.shape}")
        object.__setattr__(self, 'transition', transition)
        object.__setattr__(self, 'rewards', rewards)
        object.__setattr__(self, 'discount', float(self.discount))
        object.__setattr__(self, 'initial_dist', initial)
        object.__setattr__(self, 'terminal', terminal)
        object.__setattr__(self, 'task_names', names)
        object.__setattr__(self, 'coords', coords)

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def num_tasks(self) -> int:
        return self.rewards.shape[0]

    @property
    def r_max(self) -> float:
        return float(np.max(np.abs(self.rewards)))

    @property
    def shape(self) -> ProblemShape:
        return ProblemShape(self.num_states, self.num_actions, self.discount, self.r_max)

    def check_task(self, task: int) -> int:
        if not 0 <= int(task) < self.num_tasks:
            raise IndexError(f"task {task} out of range [0, {self.num_tasks})")
        return int(task)

    def same_as(self, other: "MultiTaskMdp") -> bool:
        """Exact equality of every table (bitwise on floats)."""
        return (
            self.discount == other.discount
            and np.array_equal(self.transition, other.transition)
            and np.array_equal(self.rewards, other.rewards)
            and np.array_equal(self.initial_dist, other.initial_dist)
            and np.array_equal(self.terminal, other.terminal)
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            'format': MDP_FORMAT,
            'version': MDP_FORMAT_VERSION,
            'num_states': self.num_states,
            'num_actions': self.num_actions,
            'num_tasks': self.num_tasks,
            'transition': self.transition.reshape(-1).tolist(),
            'rewards': self.rewards.reshape(-1).tolist(),
            'discount': self.discount,
            'initial_dist': self.initial_dist.tolist(),
            'terminal': self.terminal.astype(int).reshape(-1).tolist(),
            'task_names': list(self.task_names),
            'coords': None if self.coords is None else self.coords.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "MultiTaskMdp":
        if payload.get('format') != MDP_FORMAT:
            raise MdpValidationError(f"not a {MDP_FORMAT} document")
        if payload.get('version') != MDP_FORMAT_VERSION:
            raise MdpValidationError(f"unsupported MDP document version {payload.get('version')}")
        s, a, n = payload['num_states'], payload['num_actions'], payload['num_tasks']
        return cls(
            transition=np.asarray(payload['transition'], dtype=np.float64).reshape(s, a, s),
            rewards=np.asarray(payload['rewards'], dtype=np.float64).reshape(n, s, a),
            discount=payload['discount'],
            initial_dist=payload['initial_dist'],
            terminal=np.asarray(payload['terminal'], dtype=bool).reshape(n, s),
            task_names=tuple(payload.get('task_names') or ()),
            coords=payload.get('coords'),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MultiTaskMdp":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ValidationIssue:
    field: str
    location: Tuple[int, ...]
    message: str


@dataclass(frozen=True)
class ValidationReport:
    issues: Tuple[ValidationIssue, ...] = ()

    @property
    def is_valid(self) -> bool:
        return not self.issues

    def fields(self) -> List[str]:
        return sorted({issue.field for issue in self.issues})

    def __str__(self) -> str:
        if not self.issues:
            return "valid"
        return "; ".join(f"{i.field}{list(i.location) if i.location else ''}: {i.message}" for i in self.issues)


def validate_mdp(mdp: MultiTaskMdp) -> ValidationReport:
    """List every violated structural invariant; the report is empty iff ``mdp`` is valid."""
    issues: List[ValidationIssue] = []
    if not (0.0 <= mdp.discount < 1.0) or not np.isfinite(mdp.discount):
        issues.append(ValidationIssue('discount', (), f"must lie in [0, 1), got {mdp.discount}"))

    for s, a in zip(*np.nonzero((mdp.transition < 0).any(axis=2))):
        issues.append(ValidationIssue('transition', (int(s), int(a)), "negative probability"))
    row_sums = mdp.transition.sum(axis=2)
    for s, a in zip(*np.nonzero(np.abs(row_sums - 1.0) > ROW_TOLERANCE)):
        issues.append(ValidationIssue('transition', (int(s), int(a)), f"row sums to {row_sums[s, a]!r}"))

    if (mdp.initial_dist < 0).any():
        issues.append(ValidationIssue('initial_dist', (), "negative probability"))
    if abs(mdp.initial_dist.sum() - 1.0) > ROW_TOLERANCE:
        issues.append(ValidationIssue('initial_dist', (), f"sums to {mdp.initial_dist.sum()!r}"))

    for i, s, a in zip(*np.nonzero(~np.isfinite(mdp.rewards))):
        issues.append(ValidationIssue('rewards', (int(i), int(s), int(a)), "non-finite reward"))
    return ValidationReport(tuple(issues))


def require_valid(mdp: MultiTaskMdp) -> MultiTaskMdp:
    report = validate_mdp(mdp)
    if not report.is_valid:
        raise MdpValidationError(str(report))
    return mdp


@dataclass(frozen=True, eq=False)
class TabularPolicy:
    """
    Task-conditioned stochastic policy pi(a | s, i).

    ``probs`` has shape (N, S, A); every row lies on the simplex.
    """
    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs, np.float64)
        if probs.ndim != 3:
            raise MdpValidationError(f"policy table must have shape (N, S, A), got {probs.shape}")
        if (probs < 0).any():
            raise MdpValidationError("policy has negative probabilities")
        sums = probs.sum(axis=2)
        if np.abs(sums - 1.0).max() > ROW_TOLERANCE:
            i, s = np.unravel_index(np.argmax(np.abs(sums - 1.0)), sums.shape)
            raise MdpValidationError(f"policy row (task {i}, state {s}) sums to {sums[i, s]!r}")
        object.__setattr__(self, 'probs', probs)

    @property
    def num_tasks(self) -> int:
        return self.probs.shape[0]

    @property
    def num_states(self) -> int:
        return self.probs.shape[1]

    @property
    def num_actions(self) -> int:
        return self.probs.shape[2]

    def for_task(self, task: int) -> np.ndarray:
        return self.probs[task]

    @classmethod
    def uniform(cls, num_tasks: int, num_states: int, num_actions: int) -> "TabularPolicy":
        return cls(np.full((num_tasks, num_states, num_actions), 1.0 / num_actions))

    @classmethod
    def deterministic(cls, actions: np.ndarray, num_actions: int) -> "TabularPolicy":
        """One-hot policy from an (N, S) table of action ids."""
        actions = np.asarray(actions, dtype=np.int64)
        return cls(np.eye(num_actions)[actions])

    @classmethod
    def shared(cls, rows: np.ndarray, num_tasks: int) -> "TabularPolicy":
        """The same (S, A) table for every task."""
        rows = np.asarray(rows, dtype=np.float64)
        return cls(np.broadcast_to(rows, (num_tasks,) + rows.shape))

    def with_states(self, num_states: int) -> "TabularPolicy":
        """Pad with uniform rows (e.g. for the absorbing state of an empirical MDP)."""
        if num_states < self.num_states:
            raise MdpValidationError("cannot drop states from a policy")
        if num_states == self.num_states:
            return self
        pad = np.full((self.num_tasks, num_states - self.num_states, self.num_actions), 1.0 / self.num_actions)
        return TabularPolicy(np.concatenate([self.probs, pad], axis=1))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'num_tasks': self.num_tasks,
            'num_states': self.num_states,
            'num_actions': self.num_actions,
            'probs': self.probs.reshape(-1).tolist(),
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "TabularPolicy":
        shape = (payload['num_tasks'], payload['num_states'], payload['num_actions'])
        return cls(np.asarray(payload['probs'], dtype=np.float64).reshape(shape))


@dataclass(frozen=True, eq=False)
class OccupancyMeasure:
    """
    Discounted, (1 - gamma)-normalized state visitation of one task.

    Probability that the episode has already terminated is kept in
    ``terminated_mass`` so that ``dist.sum() + terminated_mass == 1``.
    """
    task: int
    dist: np.ndarray
    terminated_mass: float = 0.0
    source: str = field(default="policy")

    def __post_init__(self):
        dist = _frozen(self.dist, np.float64)
        if (dist < -OCCUPANCY_TOLERANCE).any():
            raise MdpValidationError("occupancy has negative mass")
        object.__setattr__(self, 'dist', np.clip(dist, 0.0, None) if (dist < 0).any() else dist)
        object.__setattr__(self, 'terminated_mass', float(self.terminated_mass))
        total = float(self.dist.sum()) + self.terminated_mass
        if abs(total - 1.0) > OCCUPANCY_TOLERANCE:
            raise MdpValidationError(f"occupancy mass is {total!r}, expected 1")

    @property
    def total_mass(self) -> float:
        return float(self.dist.sum()) + self.terminated_mass

    def normalized(self) -> np.ndarray:
        """State distribution conditioned on the episode still running."""
        mass = self.dist.sum()
        if mass <= 0:
            return np.full_like(self.dist, 1.0 / len(self.dist))
        return self.dist / mass

"""Tabular epsilon-greedy Q-learning used to produce behavior policies of controlled quality."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np

from tabcds.data.transitions import DatasetQuality, Transition, TaskDataset
from tabcds.errors import BehaviorTargetError, PreconditionError
from tabcds.mdp.multitask_mdp import MultiTaskMdp, TabularPolicy
from tabcds.mdp.solvers import exact_policy_evaluation, optimal_return

logger = logging.getLogger(__name__)


class BehaviorStage(str, Enum):
    MEDIUM = "medium"
    EXPERT = "expert"


@dataclass(frozen=True)
class BehaviorConfig:
    epsilon: float = 0.3
    learning_rate: float = 0.5
    horizon: int = 50
    max_episodes: int = 3000
    medium_fraction: float = 0.5
    expert_fraction: float = 0.95
    blend_tolerance: float = 0.025

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise PreconditionError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise PreconditionError(f"learning rate must lie in (0, 1], got {self.learning_rate}")
        if self.horizon < 1 or self.max_episodes < 1:
            raise PreconditionError("horizon and max_episodes must be positive")


@dataclass(frozen=True, eq=False)
class BehaviorRun:
    """Outcome of one behavior-learning run."""
    task: int
    stage: BehaviorStage
    policy: TabularPolicy
    policy_return: float
    optimal_return: float
    buffer: TaskDataset
    episodes: int
    mixing_weight: float = 1.0
    greedy_returns: List[float] = field(default_factory=list)

    @property
    def description(self) -> str:
        return (f"eps-greedy Q-learning {self.stage.value} snapshot after {self.episodes} episodes, "
                f"greedy weight {self.mixing_weight:.6f}")


def _greedy_rows(q: np.ndarray) -> np.ndarray:
    return np.eye(q.shape[1])[np.argmax(q, axis=1)]


def _blend_to_target(mdp: MultiTaskMdp, task: int, greedy: np.ndarray, target: float,
                     tolerance: float) -> float:
    """Mixing weight lambda so that lambda * greedy + (1 - lambda) * uniform returns ``target``."""
    uniform = np.full_like(greedy, 1.0 / greedy.shape[1])

    def value(weight: float) -> float:
        rows = weight * greedy + (1.0 - weight) * uniform
        return exact_policy_evaluation(mdp, TabularPolicy.shared(rows, mdp.num_tasks), task)

    lo, hi = 0.0, 1.0
    if value(lo) >= target:
        logger.warning("uniform policy already reaches the medium target on task %d", task)
        return lo
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        current = value(mid)
        if abs(current - target) <= tolerance:
            return mid
        if current < target:
            lo = mid
        else:
            hi = mid
    return hi


def train_behavior(
    mdp: MultiTaskMdp,
    task: int,
    stage: BehaviorStage,
    seed: int,
    config: Optional[BehaviorConfig] = None,
    min_buffer: int = 0,
) -> BehaviorRun:
    """
    Run epsilon-greedy Q-learning on ``task`` and snapshot a behavior policy.

    The greedy policy is evaluated exactly after every episode. ``medium``
    takes the first snapshot reaching ``medium_fraction`` of J* and blends it
    with the uniform policy until its return equals that fraction;
    ``expert`` takes the first snapshot reaching ``expert_fraction`` of J*.
    Learning continues until the replay buffer holds ``min_buffer``
    transitions or the episode cap is hit.

    Raises:
        BehaviorTargetError: if the return target is not reached within ``max_episodes``
    """
    config = config or BehaviorConfig()
    stage = BehaviorStage(stage)
    mdp.check_task(task)
    rng = np.random.default_rng(seed)
    j_star = optimal_return(mdp, task)
    if j_star <= 0:
        raise BehaviorTargetError(f"task {task} has non-positive optimal return {j_star}")
    fraction = config.medium_fraction if stage is BehaviorStage.MEDIUM else config.expert_fraction
    target = fraction * j_star

    num_states, num_actions = mdp.num_states, mdp.num_actions
    q = np.zeros((num_states, num_actions))
    buffer: List[Transition] = []
    snapshot: Optional[np.ndarray] = None
    snapshot_episode = 0
    greedy_returns: List[float] = []

    for episode in range(1, config.max_episodes + 1):
        s = int(rng.choice(num_states, p=mdp.initial_dist))
        for _ in range(config.horizon):
            if rng.random() < config.epsilon:
                a = int(rng.integers(num_actions))
            else:
                a = int(np.argmax(q[s]))
            s_next = int(rng.choice(num_states, p=mdp.transition[s, a]))
            r = float(mdp.rewards[task, s, a])
            done = bool(mdp.terminal[task, s])
            buffer.append(Transition(s, a, r, s_next, done, task))
            bootstrap = 0.0 if done else mdp.discount * q[s_next].max()
            q[s, a] += config.learning_rate * (r + bootstrap - q[s, a])
            if done:
                break
            s = s_next

        if snapshot is None:
            greedy = _greedy_rows(q)
            value = exact_policy_evaluation(mdp, TabularPolicy.shared(greedy, mdp.num_tasks), task)
            greedy_returns.append(value)
            if value >= target:
                snapshot, snapshot_episode = greedy, episode
                logger.debug("task %d reached %s target %.4f at episode %d", task, stage.value, target, episode)
        if snapshot is not None and len(buffer) >= min_buffer:
            break

    if snapshot is None:
        raise BehaviorTargetError(
            f"task {task}: {stage.value} target {target:.4f} not reached within {config.max_episodes} episodes"
        )

    weight = 1.0
    rows = snapshot
    if stage is BehaviorStage.MEDIUM:
        weight = _blend_to_target(mdp, task, snapshot, target, config.blend_tolerance * j_star)
        rows = weight * snapshot + (1.0 - weight) * np.full_like(snapshot, 1.0 / num_actions)
    policy = TabularPolicy.shared(rows, mdp.num_tasks)
    policy_return = exact_policy_evaluation(mdp, policy, task)
    quality = DatasetQuality.MEDIUM_REPLAY
    run = BehaviorRun(
        task=task,
        stage=stage,
        policy=policy,
        policy_return=policy_return,
        optimal_return=j_star,
        buffer=TaskDataset.from_transitions(task, buffer, quality, seed, "eps-greedy Q-learning replay buffer"),
        episodes=snapshot_episode,
        mixing_weight=weight,
        greedy_returns=greedy_returns,
    )
    logger.info("behavior %s for task %d: J=%.4f (J*=%.4f), buffer %d", stage.value, task, policy_return,
                j_star, len(run.buffer))
    return run

"""Policy rollouts, replay-buffer datasets and reward-free play data."""

from __future__ import annotations

import logging
from collections import deque
from typing import Dict, List, Optional

import numpy as np

from tabcds.data.behavior import BehaviorConfig, BehaviorStage, train_behavior
from tabcds.data.transitions import DatasetManifest, DatasetQuality, TaskDataset, Trajectory, Transition
from tabcds.errors import DatasetSizeError, PreconditionError
from tabcds.mdp.multitask_mdp import MultiTaskMdp, TabularPolicy

logger = logging.getLogger(__name__)


def rollout_policy(
    mdp: MultiTaskMdp,
    policy: TabularPolicy,
    task: int,
    num_transitions: int,
    seed: int,
    horizon: int = 50,
    quality: DatasetQuality = DatasetQuality.EXPERT,
    behavior: str = "policy rollout",
) -> TaskDataset:
    """
    Exactly ``num_transitions`` transitions of episodic rollouts from ``initial_dist``.

    Episodes end after acting in a terminal state of ``task`` or after
    ``horizon`` steps; the last episode is cut short to hit the count.
    """
    mdp.check_task(task)
    if num_transitions < 0:
        raise PreconditionError("num_transitions must be nonnegative")
    rng = np.random.default_rng(seed)
    rows = policy.for_task(task if policy.num_tasks > 1 else 0)
    num_states, num_actions = mdp.num_states, mdp.num_actions
    out: List[Transition] = []
    while len(out) < num_transitions:
        s = int(rng.choice(num_states, p=mdp.initial_dist))
        for _ in range(horizon):
            a = int(rng.choice(num_actions, p=rows[s]))
            s_next = int(rng.choice(num_states, p=mdp.transition[s, a]))
            done = bool(mdp.terminal[task, s])
            out.append(Transition(s, a, float(mdp.rewards[task, s, a]), s_next, done, task))
            if done or len(out) == num_transitions:
                break
            s = s_next
    return TaskDataset.from_transitions(task, out, quality, seed, behavior)


def make_medium_replay(
    mdp: MultiTaskMdp,
    task: int,
    seed: int,
    size: int,
    config: Optional[BehaviorConfig] = None,
) -> TaskDataset:
    """First ``size`` transitions of a medium-stage learner's replay buffer."""
    run = train_behavior(mdp, task, BehaviorStage.MEDIUM, seed, config=config, min_buffer=size)
    if len(run.buffer) < size:
        raise DatasetSizeError(f"replay buffer holds {len(run.buffer)} transitions, {size} requested")
    manifest = DatasetManifest(DatasetQuality.MEDIUM_REPLAY, seed, "eps-greedy Q-learning replay buffer", size)
    return run.buffer.head(size).with_manifest(manifest)


def generate_task_dataset(
    mdp: MultiTaskMdp,
    task: int,
    quality: DatasetQuality,
    size: int,
    seed: int,
    config: Optional[BehaviorConfig] = None,
) -> TaskDataset:
    """Dataset of the requested quality; expert and medium data are rollouts of a trained snapshot."""
    config = config or BehaviorConfig()
    quality = DatasetQuality(quality)
    if quality is DatasetQuality.MEDIUM_REPLAY:
        return make_medium_replay(mdp, task, seed, size, config)
    if quality not in (DatasetQuality.EXPERT, DatasetQuality.MEDIUM):
        raise PreconditionError(f"{quality.value} datasets come from trajectory splits")
    stage = BehaviorStage.EXPERT if quality is DatasetQuality.EXPERT else BehaviorStage.MEDIUM
    run = train_behavior(mdp, task, stage, seed, config=config)
    rollout_seed = int(np.random.SeedSequence([seed, 1]).generate_state(1)[0])
    return rollout_policy(mdp, run.policy, task, size, rollout_seed, horizon=config.horizon,
                          quality=quality, behavior=run.description).with_manifest(
        DatasetManifest(quality, seed, run.description, size))


def collect_trajectories(
    mdp: MultiTaskMdp,
    policy: TabularPolicy,
    task: int,
    num_trajectories: int,
    seed: int,
    horizon: int = 50,
) -> List[Trajectory]:
    """Complete episodes of ``policy`` on ``task`` as reward-free trajectories."""
    rng = np.random.default_rng(seed)
    rows = policy.for_task(task if policy.num_tasks > 1 else 0)
    trajectories = []
    for _ in range(num_trajectories):
        states, actions, next_states = [], [], []
        s = int(rng.choice(mdp.num_states, p=mdp.initial_dist))
        for _ in range(horizon):
            a = int(rng.choice(mdp.num_actions, p=rows[s]))
            s_next = int(rng.choice(mdp.num_states, p=mdp.transition[s, a]))
            states.append(s)
            actions.append(a)
            next_states.append(s_next)
            if mdp.terminal[task, s]:
                break
            s = s_next
        trajectories.append(Trajectory(states, actions, next_states))
    return trajectories


def _graph_distances(mdp: MultiTaskMdp, target: int) -> np.ndarray:
    """Fewest steps with nonzero probability from every state to ``target``; -1 if impossible."""
    reaches = (mdp.transition > 0).any(axis=1)
    distance = np.full(mdp.num_states, -1, dtype=np.int64)
    distance[target] = 0
    queue = deque([target])
    while queue:
        node = queue.popleft()
        for pred in np.flatnonzero(reaches[:, node]):
            if distance[pred] < 0:
                distance[pred] = distance[node] + 1
                queue.append(int(pred))
    return distance


def play_trajectories(
    mdp: MultiTaskMdp,
    num_trajectories: int,
    seed: int,
    horizon: int = 50,
    noise: float = 0.2,
) -> List[Trajectory]:
    """
    Task-agnostic play data: each trajectory heads for a random reachable
    waypoint, acting randomly with probability ``noise``, and stops on arrival.
    """
    if not 0.0 <= noise <= 1.0:
        raise PreconditionError(f"noise must lie in [0, 1], got {noise}")
    rng = np.random.default_rng(seed)
    starts = np.flatnonzero(mdp.initial_dist > 0)
    reachable = np.zeros(mdp.num_states, dtype=bool)
    for start in starts:
        reachable |= _distances_from(mdp, int(start)) >= 0
    candidates = np.flatnonzero(reachable)
    cache: Dict[int, np.ndarray] = {}
    trajectories = []
    for _ in range(num_trajectories):
        s = int(rng.choice(mdp.num_states, p=mdp.initial_dist))
        choices = candidates[candidates != s] if len(candidates) > 1 else candidates
        waypoint = int(rng.choice(choices))
        if waypoint not in cache:
            cache[waypoint] = _graph_distances(mdp, waypoint)
        distance = cache[waypoint].astype(np.float64)
        distance[distance < 0] = mdp.num_states
        states, actions, next_states = [], [], []
        for _ in range(horizon):
            if rng.random() < noise:
                a = int(rng.integers(mdp.num_actions))
            else:
                a = int(np.argmin(mdp.transition[s] @ distance))
            s_next = int(rng.choice(mdp.num_states, p=mdp.transition[s, a]))
            states.append(s)
            actions.append(a)
            next_states.append(s_next)
            s = s_next
            if s == waypoint:
                break
        trajectories.append(Trajectory(states, actions, next_states))
    logger.debug("collected %d play trajectories", len(trajectories))
    return trajectories


def _distances_from(mdp: MultiTaskMdp, source: int) -> np.ndarray:
    reaches = (mdp.transition > 0).any(axis=1)
    distance = np.full(mdp.num_states, -1, dtype=np.int64)
    distance[source] = 0
    queue = deque([source])
    while queue:
        node = queue.popleft()
        for succ in np.flatnonzero(reaches[node]):
            if distance[succ] < 0:
                distance[succ] = distance[node] + 1
                queue.append(int(succ))
    return distance

"""Reward and termination oracles used for relabeling."""

from tabcds.mdp.multitask_mdp import MultiTaskMdp


def _check_indices(mdp: MultiTaskMdp, task: int, s: int, a: int = 0) -> None:
    if not 0 <= task < mdp.num_tasks:
        raise IndexError(f"task {task} out of range [0, {mdp.num_tasks})")
    if not 0 <= s < mdp.num_states:
        raise IndexError(f"state {s} out of range [0, {mdp.num_states})")
    if not 0 <= a < mdp.num_actions:
        raise IndexError(f"action {a} out of range [0, {mdp.num_actions})")


def task_reward(mdp: MultiTaskMdp, task: int, s: int, a: int) -> float:
    _check_indices(mdp, task, s, a)
    return float(mdp.rewards[task, s, a])


def is_terminal(mdp: MultiTaskMdp, task: int, s: int) -> bool:
    _check_indices(mdp, task, s)
    return bool(mdp.terminal[task, s])

"""Empirical MDP induced by the transitions of a dataset."""

from __future__ import annotations

import numpy as np

from tabcds.errors import EmptyDatasetError, PreconditionError
from tabcds.mdp.multitask_mdp import MultiTaskMdp


def transition_counts(states, actions, next_states, num_states: int, num_actions: int) -> np.ndarray:
    """(S, A, S) integer visit counts."""
    counts = np.zeros((num_states, num_actions, num_states), dtype=np.int64)
    np.add.at(counts, (np.asarray(states), np.asarray(actions), np.asarray(next_states)), 1)
    return counts


def empirical_mdp(dataset, base: MultiTaskMdp) -> MultiTaskMdp:
    """
    Replace ``base`` dynamics by empirical frequencies of ``dataset``.

    Observed (s, a) rows are count ratios and keep the base reward oracle.
    When some (s, a) is unobserved, one absorbing zero-reward state is
    appended at index ``base.num_states`` and every unobserved pair moves
    there with reward 0. Exhaustive data therefore reproduces ``base``
    without the extra state.

    Args:
        dataset: anything exposing ``states``, ``actions`` and ``next_states`` arrays
        base: the ground-truth MDP supplying rewards, terminals and the start distribution
    """
    if len(dataset) == 0:
        raise EmptyDatasetError("empirical MDP of an empty dataset is undefined")
    num_states, num_actions = base.num_states, base.num_actions
    states = np.asarray(dataset.states)
    next_states = np.asarray(dataset.next_states)
    if states.max() >= num_states or next_states.max() >= num_states:
        raise PreconditionError("dataset references states outside the base MDP")
    counts = transition_counts(states, dataset.actions, next_states, num_states, num_actions)
    totals = counts.sum(axis=2)
    observed = totals > 0

    if observed.all():
        transition = counts / totals[:, :, None]
        return MultiTaskMdp(
            transition=transition,
            rewards=base.rewards,
            discount=base.discount,
            initial_dist=base.initial_dist,
            terminal=base.terminal,
            task_names=base.task_names,
            coords=base.coords,
        )

    absorbing = num_states
    size = num_states + 1
    transition = np.zeros((size, num_actions, size))
    safe_totals = np.where(observed, totals, 1)
    transition[:num_states, :, :num_states] = counts / safe_totals[:, :, None]
    transition[:num_states, :, absorbing] = (~observed).astype(np.float64)
    transition[absorbing, :, absorbing] = 1.0

    rewards = np.zeros((base.num_tasks, size, num_actions))
    rewards[:, :num_states] = np.where(observed[None], base.rewards, 0.0)
    terminal = np.zeros((base.num_tasks, size), dtype=bool)
    terminal[:, :num_states] = base.terminal
    coords = None
    if base.coords is not None:
        coords = np.vstack([base.coords, [[-1, -1]]])
    return MultiTaskMdp(
        transition=transition,
        rewards=rewards,
        discount=base.discount,
        initial_dist=np.append(base.initial_dist, 0.0),
        terminal=terminal,
        task_names=base.task_names,
        coords=coords,
    )


def has_absorbing_state(empirical: MultiTaskMdp, base: MultiTaskMdp) -> bool:
    return empirical.num_states == base.num_states + 1

import numpy as np
import pytest

from tabcds.data.transitions import DatasetManifest, DatasetQuality, TaskDataset
from tabcds.mdp.multitask_mdp import MultiTaskMdp
from tabcds.utils.notification_manager import NotificationManager


@pytest.fixture(autouse=True)
def _no_listeners():
    NotificationManager.clearListeners()
    yield
    NotificationManager.clearListeners()


def _random_mdp(rng, num_states=5, num_actions=3, num_tasks=2, discount=0.9, deterministic=False,
                terminal_prob=0.0):
    if deterministic:
        transition = np.zeros((num_states, num_actions, num_states))
        successors = rng.integers(num_states, size=(num_states, num_actions))
        transition[np.arange(num_states)[:, None], np.arange(num_actions)[None, :], successors] = 1.0
    else:
        transition = rng.dirichlet(np.ones(num_states), size=(num_states, num_actions))
    return MultiTaskMdp(
        transition=transition,
        rewards=rng.uniform(0.0, 1.0, size=(num_tasks, num_states, num_actions)),
        discount=discount,
        initial_dist=rng.dirichlet(np.ones(num_states)),
        terminal=rng.random((num_tasks, num_states)) < terminal_prob,
    )


def _dataset(mdp, task, states, actions, next_states=None, origins=None, quality=DatasetQuality.EXPERT):
    states = np.asarray(states, dtype=np.int64)
    actions = np.asarray(actions, dtype=np.int64)
    if next_states is None:
        next_states = np.argmax(mdp.transition[states, actions], axis=1)
    if origins is None:
        origins = np.full(len(states), task)
    return TaskDataset(
        task=task,
        states=states,
        actions=actions,
        rewards=mdp.rewards[task][states, actions],
        next_states=next_states,
        dones=mdp.terminal[task][states],
        origins=origins,
        manifest=DatasetManifest(quality, 0, "test", len(states)),
    )


def _exhaustive(mdp, task):
    """Every (s, a) once, with its most likely successor."""
    states, actions = np.divmod(np.arange(mdp.num_states * mdp.num_actions), mdp.num_actions)
    return _dataset(mdp, task, states, actions)


@pytest.fixture
def random_mdp():
    return _random_mdp


@pytest.fixture
def make_dataset():
    return _dataset


@pytest.fixture
def exhaustive_dataset():
    return _exhaustive

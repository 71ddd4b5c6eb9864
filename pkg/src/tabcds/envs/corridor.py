"""Dense-reward tri-task corridor: run forward, run backward, jump."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

import numpy as np

from tabcds.errors import EnvironmentSpecError
from tabcds.mdp.multitask_mdp import MultiTaskMdp

CORRIDOR_TASKS = ("forward", "backward", "jump")


class CorridorAction(IntEnum):
    LEFT = 0
    RIGHT = 1
    HOP = 2
    STAY = 3


@dataclass(frozen=True)
class CorridorTriTaskSpec:
    """
    A 1-D corridor of ``length`` cells shared by three tasks.

    forward pays 1 for every attempted rightward move that is not blocked by
    the right wall, backward mirrors it to the left, jump pays 1 only for HOP
    at ``jump_cell``. A slip leaves the agent in place; HOP and STAY never move.
    """
    length: int = 10
    slip: float = 0.1
    jump_cell: Optional[int] = None
    start_cell: Optional[int] = None
    discount: float = 0.9

    @property
    def resolved_jump_cell(self) -> int:
        return self.length // 2 + 1 if self.jump_cell is None else self.jump_cell

    @property
    def resolved_start_cell(self) -> int:
        return self.length // 2 if self.start_cell is None else self.start_cell

    def validate(self) -> None:
        if self.length < 3:
            raise EnvironmentSpecError(f"corridor length must be at least 3, got {self.length}")
        if not 0.0 <= self.slip < 0.5:
            raise EnvironmentSpecError(f"slip must lie in [0, 0.5), got {self.slip}")
        if not 0 <= self.resolved_jump_cell < self.length:
            raise EnvironmentSpecError(f"jump cell {self.resolved_jump_cell} outside the corridor")
        if not 0 <= self.resolved_start_cell < self.length:
            raise EnvironmentSpecError(f"start cell {self.resolved_start_cell} outside the corridor")
        if not 0.0 <= self.discount < 1.0:
            raise EnvironmentSpecError(f"discount must lie in [0, 1), got {self.discount}")


def build_corridor_tritask(spec: CorridorTriTaskSpec) -> MultiTaskMdp:
    spec.validate()
    length, slip = spec.length, spec.slip
    cells = np.arange(length)
    num_actions = len(CorridorAction)

    transition = np.zeros((length, num_actions, length))
    for action, step in ((CorridorAction.LEFT, -1), (CorridorAction.RIGHT, 1)):
        target = np.clip(cells + step, 0, length - 1)
        transition[cells, action, target] += 1.0 - slip
        transition[cells, action, cells] += slip
    transition[cells, CorridorAction.HOP, cells] = 1.0
    transition[cells, CorridorAction.STAY, cells] = 1.0

    rewards = np.zeros((len(CORRIDOR_TASKS), length, num_actions))
    rewards[0, :length - 1, CorridorAction.RIGHT] = 1.0
    rewards[1, 1:, CorridorAction.LEFT] = 1.0
    rewards[2, spec.resolved_jump_cell, CorridorAction.HOP] = 1.0

    initial = np.zeros(length)
    initial[spec.resolved_start_cell] = 1.0
    coords = np.stack([cells, np.zeros(length, dtype=np.int64)], axis=1)
    return MultiTaskMdp(
        transition=transition,
        rewards=rewards,
        discount=spec.discount,
        initial_dist=initial,
        terminal=np.zeros((len(CORRIDOR_TASKS), length), dtype=bool),
        task_names=CORRIDOR_TASKS,
        coords=coords,
    )

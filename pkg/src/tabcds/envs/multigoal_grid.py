"""Sparse-reward multi-goal grid: one goal-reaching task per goal cell."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import IntEnum
from typing import Dict, FrozenSet, Iterable, List, Tuple

import numpy as np

from tabcds.errors import EnvironmentSpecError, GoalUnreachableError
from tabcds.mdp.multitask_mdp import MultiTaskMdp

Cell = Tuple[int, int]


class GridAction(IntEnum):
    UP = 0
    RIGHT = 1
    DOWN = 2
    LEFT = 3


MOVES: Dict[GridAction, Cell] = {
    GridAction.UP: (0, -1),
    GridAction.RIGHT: (1, 0),
    GridAction.DOWN: (0, 1),
    GridAction.LEFT: (-1, 0),
}


@dataclass(frozen=True)
class MultiGoalGridSpec:
    """
    Cells are (x, y); state id is ``y * width + x``. Wall cells stay in the
    state space but are unreachable. Moving into a wall or off the grid is a
    no-op. Every cell within Chebyshev ``goal_radius`` of goal ``i`` pays 1
    under task ``i`` for any action and ends the episode.
    """
    width: int
    height: int
    goals: Tuple[Cell, ...]
    walls: FrozenSet[Cell] = frozenset()
    start: Cell = (0, 0)
    goal_radius: int = 0
    slip: float = 0.0
    discount: float = 0.95

    @property
    def num_states(self) -> int:
        return self.width * self.height

    def state(self, cell: Cell) -> int:
        x, y = cell
        return y * self.width + x

    def cell(self, state: int) -> Cell:
        return int(state) % self.width, int(state) // self.width

    def inside(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def goal_region(self, task: int) -> List[Cell]:
        gx, gy = self.goals[task]
        r = self.goal_radius
        return [
            (x, y)
            for y in range(gy - r, gy + r + 1)
            for x in range(gx - r, gx + r + 1)
            if self.inside((x, y)) and (x, y) not in self.walls
        ]

    def validate(self) -> None:
        if self.width < 1 or self.height < 1:
            raise EnvironmentSpecError(f"grid must be at least 1x1, got {self.width}x{self.height}")
        if not self.goals:
            raise EnvironmentSpecError("grid needs at least one goal")
        if self.goal_radius < 0:
            raise EnvironmentSpecError("goal radius must be nonnegative")
        if not 0.0 <= self.slip < 0.5:
            raise EnvironmentSpecError(f"slip must lie in [0, 0.5), got {self.slip}")
        if not 0.0 <= self.discount < 1.0:
            raise EnvironmentSpecError(f"discount must lie in [0, 1), got {self.discount}")
        for name, cell in [('start', self.start)] + [(f'goal {i}', g) for i, g in enumerate(self.goals)]:
            if not self.inside(cell):
                raise EnvironmentSpecError(f"{name} {cell} lies outside the {self.width}x{self.height} grid")
            if cell in self.walls:
                raise EnvironmentSpecError(f"{name} {cell} is a wall")


def step_cell(spec: MultiGoalGridSpec, cell: Cell, action: GridAction) -> Cell:
    dx, dy = MOVES[GridAction(action)]
    target = (cell[0] + dx, cell[1] + dy)
    if not spec.inside(target) or target in spec.walls:
        return cell
    return target


def grid_distances(spec: MultiGoalGridSpec, sources: Iterable[Cell]) -> np.ndarray:
    """Breadth-first step distance from the nearest source; -1 where unreachable."""
    distance = np.full(spec.num_states, -1, dtype=np.int64)
    queue = deque()
    for cell in sources:
        distance[spec.state(cell)] = 0
        queue.append(cell)
    while queue:
        cell = queue.popleft()
        for action in GridAction:
            nxt = step_cell(spec, cell, action)
            if distance[spec.state(nxt)] < 0:
                distance[spec.state(nxt)] = distance[spec.state(cell)] + 1
                queue.append(nxt)
    return distance


def build_multigoal_grid(spec: MultiGoalGridSpec) -> MultiTaskMdp:
    spec.validate()
    reachable = grid_distances(spec, [spec.start]) >= 0
    for task, goal in enumerate(spec.goals):
        if not reachable[spec.state(goal)]:
            raise GoalUnreachableError(f"goal {task} at {goal} is not reachable from {spec.start}")

    num_states, num_actions = spec.num_states, len(GridAction)
    transition = np.zeros((num_states, num_actions, num_states))
    for s in range(num_states):
        cell = spec.cell(s)
        for action in GridAction:
            nxt = spec.state(step_cell(spec, cell, action))
            transition[s, action, nxt] += 1.0 - spec.slip
            transition[s, action, s] += spec.slip

    num_tasks = len(spec.goals)
    rewards = np.zeros((num_tasks, num_states, num_actions))
    terminal = np.zeros((num_tasks, num_states), dtype=bool)
    for task in range(num_tasks):
        for cell in spec.goal_region(task):
            rewards[task, spec.state(cell), :] = 1.0
            terminal[task, spec.state(cell)] = True

    initial = np.zeros(num_states)
    initial[spec.state(spec.start)] = 1.0
    coords = np.array([spec.cell(s) for s in range(num_states)], dtype=np.int64)
    return MultiTaskMdp(
        transition=transition,
        rewards=rewards,
        discount=spec.discount,
        initial_dist=initial,
        terminal=terminal,
        task_names=tuple(f"goal{i}" for i in range(num_tasks)),
        coords=coords,
    )

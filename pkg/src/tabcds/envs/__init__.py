"""Tabular analogue environments."""

from .corridor import CORRIDOR_TASKS, CorridorAction, CorridorTriTaskSpec, build_corridor_tritask
from .multigoal_grid import GridAction, MultiGoalGridSpec, build_multigoal_grid, grid_distances, step_cell
from .skill_tags import SkillTag, corridor_skill_tags, grid_skill_tags
from .rewards import is_terminal, task_reward

__all__ = [
    'CORRIDOR_TASKS', 'CorridorAction', 'CorridorTriTaskSpec', 'build_corridor_tritask',
    'GridAction', 'MultiGoalGridSpec', 'build_multigoal_grid', 'grid_distances', 'step_cell',
    'SkillTag', 'corridor_skill_tags', 'grid_skill_tags',
    'is_terminal', 'task_reward',
]

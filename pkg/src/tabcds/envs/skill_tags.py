"""Manual task-to-skill grouping used by skill routing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

from tabcds.envs.multigoal_grid import MultiGoalGridSpec
from tabcds.errors import EnvironmentSpecError


@dataclass(frozen=True)
class SkillTag:
    """``labels[i]`` is the single skill label of task ``i``."""
    labels: Tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(label).strip() for label in self.labels)
        if not labels or any(not label for label in labels):
            raise EnvironmentSpecError("every task needs exactly one non-empty skill label")
        object.__setattr__(self, 'labels', labels)

    @property
    def num_tasks(self) -> int:
        return len(self.labels)

    def skill_of(self, task: int) -> str:
        return self.labels[task]

    @classmethod
    def from_sequence(cls, labels: Sequence[str]) -> "SkillTag":
        return cls(tuple(labels))


def corridor_skill_tags() -> SkillTag:
    """forward and backward share locomotion; jump stands alone."""
    return SkillTag(("locomotion", "locomotion", "jump"))


def grid_skill_tags(spec: MultiGoalGridSpec) -> SkillTag:
    """Goals in the left half of the grid are one skill, the rest another."""
    return SkillTag(tuple("reach-left" if 2 * gx < spec.width else "reach-right" for gx, _ in spec.goals))

"""Data-sharing strategy variants and their configuration presets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Tuple

from tabcds.envs.skill_tags import SkillTag
from tabcds.errors import ConfigError, PreconditionError


class StrategyKind(str, Enum):
    NO_SHARE = "NoShare"
    SHARE_ALL = "ShareAll"
    SKILL = "Skill"
    HIPI = "Hipi"
    CDS_BASIC = "CdsBasic"
    CDS_QUANTILE = "CdsQuantile"
    CDS_WEIGHTED = "CdsWeighted"


# Temperature clip bounds (tau_min, tau_max) per domain family.
TEMPERATURE_PRESETS: Dict[str, Tuple[float, float]] = {
    'default': (1.0, 50.0),
    'halfcheetah': (10.0, math.inf),
    'walker': (5.0, math.inf),
    'ant': (10.0, 25.0),
    'manipulation': (1.0, 50.0),
    'maze': (10.0, math.inf),
}


@dataclass(frozen=True)
class SharingStrategy:
    """
    One variant plus the parameters it reads.

    Attributes:
        kind: variant tag
        k: percentile for the quantile rule, in [0, 100]
        skill_tags: task grouping for skill routing
        tau_min, tau_max, decay: adaptive temperature settings of weighted CDS
    """
    kind: StrategyKind
    k: float = 90.0
    skill_tags: Optional[SkillTag] = None
    tau_min: float = 1.0
    tau_max: float = 50.0
    decay: float = 0.995

    def __post_init__(self):
        object.__setattr__(self, 'kind', StrategyKind(self.kind))
        if not 0.0 <= self.k <= 100.0:
            raise PreconditionError(f"quantile k must lie in [0, 100], got {self.k}")
        if self.kind is StrategyKind.SKILL and self.skill_tags is None:
            raise PreconditionError("skill routing needs skill tags")
        if not 0.0 < self.tau_min <= self.tau_max:
            raise PreconditionError(f"need 0 < tau_min <= tau_max, got [{self.tau_min}, {self.tau_max}]")
        if not 0.0 <= self.decay < 1.0:
            raise PreconditionError(f"decay must lie in [0, 1), got {self.decay}")

    @property
    def tag(self) -> str:
        if self.kind is StrategyKind.CDS_QUANTILE:
            return f"CdsQuantile(k={self.k:g})"
        if self.kind is StrategyKind.CDS_WEIGHTED:
            return f"CdsWeighted(k={self.k:g},tau=[{self.tau_min:g},{self.tau_max:g}])"
        return self.kind.value

    @property
    def is_hard(self) -> bool:
        return self.kind is not StrategyKind.CDS_WEIGHTED

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind.value,
            'tag': self.tag,
            'k': self.k,
            'skill_tags': None if self.skill_tags is None else list(self.skill_tags.labels),
            'tau_min': self.tau_min,
            'tau_max': self.tau_max if math.isfinite(self.tau_max) else "inf",
            'decay': self.decay,
        }


def no_share() -> SharingStrategy:
    return SharingStrategy(StrategyKind.NO_SHARE)


def share_all() -> SharingStrategy:
    return SharingStrategy(StrategyKind.SHARE_ALL)


def skill(tags: SkillTag) -> SharingStrategy:
    return SharingStrategy(StrategyKind.SKILL, skill_tags=tags)


def hipi() -> SharingStrategy:
    return SharingStrategy(StrategyKind.HIPI)


def cds_basic() -> SharingStrategy:
    return SharingStrategy(StrategyKind.CDS_BASIC)


def cds_quantile(k: float = 90.0) -> SharingStrategy:
    return SharingStrategy(StrategyKind.CDS_QUANTILE, k=k)


def cds_weighted(k: float = 90.0, tau_min: float = 1.0, tau_max: float = 50.0,
                 decay: float = 0.995) -> SharingStrategy:
    return SharingStrategy(StrategyKind.CDS_WEIGHTED, k=k, tau_min=tau_min, tau_max=tau_max, decay=decay)


def parse_strategy(
    text: str,
    k: float = 90.0,
    skill_tags: Optional[SkillTag] = None,
    tau_bounds: Tuple[float, float] = TEMPERATURE_PRESETS['default'],
    decay: float = 0.995,
) -> SharingStrategy:
    """
    Build a strategy from its name; ``CdsQuantile:50`` overrides ``k`` inline.

    Raises:
        ConfigError: for unknown names or malformed parameters
    """
    name, _, param = text.strip().partition(':')
    try:
        kind = StrategyKind(name)
    except ValueError:
        known = ", ".join(kind.value for kind in StrategyKind)
        raise ConfigError(f"unknown strategy {name!r} (expected one of {known})", field="sharing/strategies")
    if param:
        try:
            k = float(param)
        except ValueError:
            raise ConfigError(f"bad percentile in {text!r}", field="sharing/strategies")
    if kind is StrategyKind.SKILL and skill_tags is None:
        raise ConfigError("Skill strategy needs sharing/skills", field="sharing/skills")
    try:
        return SharingStrategy(kind, k=k, skill_tags=skill_tags, tau_min=tau_bounds[0], tau_max=tau_bounds[1],
                               decay=decay)
    except PreconditionError as exc:
        raise ConfigError(str(exc), field="sharing") from exc

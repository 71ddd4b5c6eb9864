"""Learner hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Dict

from tabcds.errors import PreconditionError


class MuMode(str, Enum):
    """Distribution the CQL penalty pushes Q down on."""
    UNIFORM = "uniform"
    SOFTMAX = "softmax"
    CURRENT_POLICY = "current-policy"
    BEHAVIOR = "behavior"


class WeightRule(str, Enum):
    """Where weighted sharing applies CDS weights."""
    RELABELED_ONLY = "relabeled-only"
    RELABELED_PLUS_HALF_ORIGINAL = "relabeled-plus-50%-original"


class LearnerKind(str, Enum):
    CQL = "cql"
    BRAC = "brac"


@dataclass(frozen=True)
class LearnerConfig:
    """
    Attributes:
        learning_rate: step toward each sweep's minimizer; 1.0 is exact fitted iteration
        iterations: total learner sweeps K
        beta: CQL penalty coefficient
        alpha: BRAC divergence coefficient
        mu_mode: penalty distribution for CQL
        mu_temperature: temperature of the softmax penalty distribution
        policy_temperature: softmax temperature of policy extraction; 0 is greedy
        batch_size_per_task: stratified batch size (half original, half relabeled); 0 uses all data
        weight_rule: CDS weight application rule
        rebuild_every: sweeps between effective-dataset rebuilds
        kl_max: clamp for BRAC KL at out-of-support states
        q_cap_margin: slack added to the value bound before declaring divergence
        newton_steps: inner iterations of the per-state softmax penalty solve
    """
    learning_rate: float = 1.0
    iterations: int = 100
    beta: float = 1.0
    alpha: float = 0.0
    mu_mode: MuMode = MuMode.SOFTMAX
    mu_temperature: float = 1.0
    policy_temperature: float = 0.0
    batch_size_per_task: int = 128
    weight_rule: WeightRule = WeightRule.RELABELED_ONLY
    rebuild_every: int = 10
    kl_max: float = 20.0
    q_cap_margin: float = 1.0
    learner: LearnerKind = LearnerKind.CQL
    newton_steps: int = 50

    def __post_init__(self):
        object.__setattr__(self, 'mu_mode', MuMode(self.mu_mode))
        object.__setattr__(self, 'weight_rule', WeightRule(self.weight_rule))
        object.__setattr__(self, 'learner', LearnerKind(self.learner))
        if not 0.0 < self.learning_rate <= 1.0:
            raise PreconditionError(f"learning_rate must lie in (0, 1], got {self.learning_rate}")
        if self.iterations < 1 or self.rebuild_every < 1:
            raise PreconditionError("iterations and rebuild_every must be positive")
        if self.beta < 0 or self.alpha < 0:
            raise PreconditionError("beta and alpha must be nonnegative")
        if self.mu_temperature <= 0:
            raise PreconditionError("mu_temperature must be positive")
        if self.policy_temperature < 0:
            raise PreconditionError("policy_temperature must be nonnegative")
        if self.batch_size_per_task < 0 or self.batch_size_per_task % 2:
            raise PreconditionError(
                f"batch_size_per_task must be even and nonnegative, got {self.batch_size_per_task}"
            )
        if self.kl_max <= 0 or self.q_cap_margin < 0:
            raise PreconditionError("kl_max must be positive and q_cap_margin nonnegative")

    @property
    def rounds(self) -> int:
        """Outer rounds after warm-up; each runs ``rebuild_every`` sweeps."""
        return max(1, -(-self.iterations // self.rebuild_every))

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        for key in ('mu_mode', 'weight_rule', 'learner'):
            out[key] = out[key].value
        return out

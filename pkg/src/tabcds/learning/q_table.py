"""Learned conservative Q tables and softmax policy extraction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Optional, Union

import numpy as np
from scipy.special import softmax

from tabcds.errors import LearnerDivergenceError, PreconditionError
from tabcds.learning.config import LearnerKind, MuMode
from tabcds.mdp.multitask_mdp import TabularPolicy


@dataclass(frozen=True, eq=False)
class ConservativeQTable:
    """
    Q-hat(s, a, i) with the coefficients and learner that produced it.

    For BRAC tables ``kl`` holds KL(pi(.|s, i) || pi_beta(.|s, i)) of the final
    policy and ``kl_clamped`` marks states where it was clamped.
    """
    q: np.ndarray
    beta: float
    alpha: float
    mu_mode: MuMode
    learner: LearnerKind = LearnerKind.CQL
    kl: Optional[np.ndarray] = None
    kl_clamped: Optional[np.ndarray] = None

    def __post_init__(self):
        q = np.array(self.q, dtype=np.float64)
        if q.ndim != 3:
            raise PreconditionError(f"Q table must have shape (N, S, A), got {q.shape}")
        if not np.isfinite(q).all():
            raise LearnerDivergenceError("Q table has non-finite entries")
        q.setflags(write=False)
        object.__setattr__(self, 'q', q)
        object.__setattr__(self, 'mu_mode', MuMode(self.mu_mode))
        object.__setattr__(self, 'learner', LearnerKind(self.learner))

    @property
    def num_tasks(self) -> int:
        return self.q.shape[0]

    @property
    def num_states(self) -> int:
        return self.q.shape[1]

    @property
    def num_actions(self) -> int:
        return self.q.shape[2]

    def conservative_values(self) -> np.ndarray:
        """Values used by sharing rules: Q for CQL, Q - alpha * KL(s) for BRAC."""
        if self.learner is LearnerKind.BRAC and self.kl is not None:
            return self.q - self.alpha * self.kl[:, :, None]
        return self.q

    def conservative_q(self, s: int, a: int, task: int) -> float:
        return float(self.conservative_values()[task, s, a])

    def to_dict(self) -> Dict[str, Any]:
        return {
            'shape': list(self.q.shape),
            'q': self.q.reshape(-1).tolist(),
            'beta': self.beta,
            'alpha': self.alpha,
            'mu_mode': self.mu_mode.value,
            'learner': self.learner.value,
            'kl': None if self.kl is None else np.asarray(self.kl).reshape(-1).tolist(),
            'kl_clamped': None if self.kl_clamped is None else np.asarray(self.kl_clamped, dtype=int).reshape(-1).tolist(),
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "ConservativeQTable":
        shape = tuple(payload['shape'])
        kl = payload.get('kl')
        clamped = payload.get('kl_clamped')
        return cls(
            q=np.asarray(payload['q'], dtype=np.float64).reshape(shape),
            beta=float(payload['beta']),
            alpha=float(payload['alpha']),
            mu_mode=MuMode(payload['mu_mode']),
            learner=LearnerKind(payload.get('learner', 'cql')),
            kl=None if kl is None else np.asarray(kl, dtype=np.float64).reshape(shape[:2]),
            kl_clamped=None if clamped is None else np.asarray(clamped, dtype=bool).reshape(shape[:2]),
        )


def softmax_rows(
    values: np.ndarray,
    temperature: float,
    action_weights: Optional[np.ndarray] = None,
    support: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Row-wise softmax of ``w * Q / T`` over the last axis.

    ``temperature == 0`` is the greedy limit with ties to the lowest index.
    ``support`` masks actions out of a row unless it would leave the row empty.
    """
    if temperature < 0:
        raise PreconditionError("temperature must be nonnegative")
    logits = np.array(values, dtype=np.float64)
    if action_weights is not None:
        logits = logits * action_weights
    if support is not None:
        support = np.asarray(support, dtype=bool)
        allowed = support | ~support.any(axis=-1, keepdims=True)
        logits = np.where(allowed, logits, -np.inf)
    if temperature == 0:
        return np.eye(logits.shape[-1])[np.argmax(logits, axis=-1)]
    return softmax(logits / temperature, axis=-1)


def extract_policy(
    q: Union[ConservativeQTable, np.ndarray],
    temperature: float,
    action_weights: Optional[np.ndarray] = None,
    support: Optional[np.ndarray] = None,
) -> TabularPolicy:
    """Softmax policy of a Q table; weighted sharing passes per-pair CDS weights."""
    values = q.q if isinstance(q, ConservativeQTable) else np.asarray(q, dtype=np.float64)
    rows = softmax_rows(values, temperature, action_weights, support)
    # Renormalize away rounding so rows pass the simplex check.
    rows = rows / rows.sum(axis=-1, keepdims=True)
    return TabularPolicy(rows)

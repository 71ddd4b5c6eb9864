"""
Exact terms of the safe policy improvement guarantee for shared data, and
numeric checks of the two lemmas it rests on.

The guarantee reads J(pi*) >= J(pi_beta) - zeta with

    zeta = C_sample / (1 - gamma)^2 * E_{s ~ d^{pi*}}[sqrt((D_CQL(pi*, pi_beta*)(s) + 1) / |D_eff(s)|)]
           - [alpha * D(pi*, pi_beta*) + J(pi_beta*) - J(pi_beta)]
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from tabcds.analysis.divergences import KL_SMOOTHING, d_cql_rows, smooth_rows, total_variation
from tabcds.errors import PreconditionError
from tabcds.learning.behavior_policy import EmpiricalBehaviorPolicy
from tabcds.mdp.empirical import empirical_mdp
from tabcds.mdp.multitask_mdp import MultiTaskMdp, TabularPolicy
from tabcds.mdp.solvers import exact_policy_evaluation, state_occupancy

logger = logging.getLogger(__name__)

PolicyLike = Union[TabularPolicy, EmpiricalBehaviorPolicy]

LEMMA1_PASS = "pass"
LEMMA1_FAIL = "fail"
LEMMA1_SKIPPED = "skipped"
LEMMA1_PREMISE_UNMET = "premise-unmet"
LEMMA1_DEGENERATE = "degenerate"

LEMMA2_TOLERANCE = 1e-12


def _jsonable(value: float) -> Union[float, str]:
    return value if math.isfinite(value) else str(value)


def _as_policy(policy: PolicyLike) -> TabularPolicy:
    return policy.as_policy() if isinstance(policy, EmpiricalBehaviorPolicy) else policy


def _rows(policy: PolicyLike, task: int) -> np.ndarray:
    policy = _as_policy(policy)
    return policy.for_task(task if policy.num_tasks > 1 else 0)


def _weighted(weights: np.ndarray, values: np.ndarray) -> float:
    """sum_s w(s) v(s) over states with positive weight, so 0 * inf never appears."""
    visited = weights > 0
    return float(np.sum(weights[visited] * values[visited]))


@dataclass(frozen=True)
class BoundConstants:
    """
    Explicit stand-ins for the constants the guarantee leaves unspecified.

    Attributes:
        c_sample: multiplier of the sampling error term
        r_max: reward bound; the MDP's max |R| when None
        smoothing: uniform mass mixed into pi_beta* rows pi* leaves
        lemma1_c: performance-difference constant; 2 / (1 - gamma) when None
    """
    c_sample: float = 1.0
    r_max: Optional[float] = None
    smoothing: float = KL_SMOOTHING
    lemma1_c: Optional[float] = None

    def __post_init__(self):
        if self.c_sample < 0:
            raise PreconditionError("c_sample must be nonnegative")
        if self.r_max is not None and self.r_max < 0:
            raise PreconditionError("r_max must be nonnegative")

    def resolved_r_max(self, mdp: MultiTaskMdp) -> float:
        return mdp.r_max if self.r_max is None else float(self.r_max)

    def resolved_lemma1_c(self, discount: float) -> float:
        return 2.0 / (1.0 - discount) if self.lemma1_c is None else float(self.lemma1_c)


@dataclass(frozen=True, eq=False)
class BoundReport:
    """
    Every term of zeta for one task, with the exact returns it was built from.

    ``zeta == sampling_error_term - (divergence_bonus + improvement_term_a)``.
    """
    task: int
    sampling_error_term: float
    divergence_bonus: float
    improvement_term_a: float
    zeta: float
    c_sample: float
    r_max: float
    discount: float
    alpha: float
    epsilon: float
    counts: np.ndarray
    divergence: np.ndarray
    j_star: float
    j_behavior: float
    j_behavior_star: float

    @property
    def gap(self) -> float:
        """J(pi*) - J(pi_beta)."""
        return self.j_star - self.j_behavior

    @property
    def holds(self) -> bool:
        return self.gap >= -self.zeta

    def to_dict(self) -> Dict[str, Any]:
        return {
            'task': self.task,
            'sampling_error_term': _jsonable(self.sampling_error_term),
            'divergence_bonus': self.divergence_bonus,
            'improvement_term_a': self.improvement_term_a,
            'zeta': _jsonable(self.zeta),
            'constants': {'C_sample': self.c_sample, 'R_max': self.r_max, 'gamma': self.discount},
            'alpha': self.alpha,
            'epsilon': self.epsilon,
            'counts': self.counts.astype(int).tolist(),
            'divergence': self.divergence.tolist(),
            'J_star': self.j_star,
            'J_behavior': self.j_behavior,
            'J_behavior_star': self.j_behavior_star,
            'gap': self.gap,
            'holds': self.holds,
        }


def sampling_error_term(weights, divergence, counts, c_sample: float, discount: float) -> float:
    """
    C_sample / (1 - gamma)^2 * sum_s w(s) sqrt((D(s) + 1) / n(s)).

    Infinite when a state with positive weight has no data.
    """
    weights = np.asarray(weights, dtype=np.float64)
    divergence = np.asarray(divergence, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)
    visited = weights > 0
    if (counts[visited] <= 0).any():
        return math.inf
    inner = np.sum(weights[visited] * np.sqrt((divergence[visited] + 1.0) / counts[visited]))
    return float(c_sample / (1.0 - discount) ** 2 * inner)


def compose_zeta(sampling: float, bonus: float, improvement: float) -> float:
    return sampling - (bonus + improvement)


def spi_bound(
    mdp: MultiTaskMdp,
    pi_star: TabularPolicy,
    pi_beta: PolicyLike,
    pi_beta_star: PolicyLike,
    dataset,
    task: int,
    alpha: float = 0.0,
    constants: Optional[BoundConstants] = None,
) -> BoundReport:
    """
    Compute zeta for ``pi_star`` learned on ``dataset`` (task ``task``'s D_eff).

    The state distribution is pi*'s normalized occupancy in the empirical MDP
    of ``dataset``; its absorbing state is left out. Returns are exact in ``mdp``.
    """
    constants = constants or BoundConstants()
    mdp.check_task(task)
    num_states = mdp.num_states
    model = empirical_mdp(dataset, mdp)
    star = _rows(pi_star, task)
    behavior_star = smooth_rows(_rows(pi_beta_star, task), star, constants.smoothing)
    divergence = d_cql_rows(star, behavior_star)

    counts = np.bincount(np.asarray(dataset.states, dtype=np.int64), minlength=num_states)
    weights = state_occupancy(model, pi_star.with_states(model.num_states), task).normalized()[:num_states]
    epsilon = _weighted(weights, divergence)
    sampling = sampling_error_term(weights, divergence, counts, constants.c_sample, mdp.discount)

    j_star = exact_policy_evaluation(mdp, pi_star, task)
    j_behavior = exact_policy_evaluation(mdp, _as_policy(pi_beta), task)
    j_behavior_star = exact_policy_evaluation(mdp, _as_policy(pi_beta_star), task)
    bonus = alpha * epsilon
    improvement = j_behavior_star - j_behavior
    report = BoundReport(
        task=task,
        sampling_error_term=sampling,
        divergence_bonus=bonus,
        improvement_term_a=improvement,
        zeta=compose_zeta(sampling, bonus, improvement),
        c_sample=constants.c_sample,
        r_max=constants.resolved_r_max(mdp),
        discount=mdp.discount,
        alpha=alpha,
        epsilon=epsilon,
        counts=counts,
        divergence=divergence,
        j_star=j_star,
        j_behavior=j_behavior,
        j_behavior_star=j_behavior_star,
    )
    logger.debug("task %d: zeta = %.6g, gap = %.6g", task, report.zeta, report.gap)
    return report


@dataclass(frozen=True)
class Lemma1Row:
    alpha: float
    tv_term: float
    divergence_term: float
    condition: bool
    premise: bool
    status: str


@dataclass(frozen=True, eq=False)
class Lemma1Report:
    """
    Threshold condition C R_max / (1 - gamma) D_TV <= alpha D per alpha, and
    whether J_Deff(pi_beta*) >= J_Deff(pi_beta) followed where it held.
    """
    task: int
    c: float
    r_max: float
    total_variation: float
    divergence: float
    threshold_alpha: float
    j_star: float
    j_behavior: float
    j_behavior_star: float
    rows: List[Lemma1Row] = field(default_factory=list)

    @property
    def statuses(self) -> List[str]:
        return [row.status for row in self.rows]

    @property
    def improved(self) -> bool:
        return self.j_behavior_star >= self.j_behavior - _tolerance(self.j_behavior)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([row.__dict__ for row in self.rows],
                            columns=['alpha', 'tv_term', 'divergence_term', 'condition', 'premise', 'status'])


def _tolerance(value: float) -> float:
    return 1e-10 * max(1.0, abs(value))


def lemma1_threshold(tv_term: float, divergence: float) -> float:
    """Smallest alpha meeting the condition."""
    if tv_term == 0:
        return 0.0
    if divergence == 0:
        return math.inf
    return tv_term / divergence


def check_lemma1(
    mdp: MultiTaskMdp,
    dataset,
    pi_star: TabularPolicy,
    pi_beta_star: PolicyLike,
    pi_beta: PolicyLike,
    alphas: Sequence[float],
    task: int = 0,
    constants: Optional[BoundConstants] = None,
) -> Lemma1Report:
    """
    Evaluate the behavior-improvement lemma in the empirical MDP of ``dataset``.

    D_TV and D_CQL are averaged under pi_beta*'s normalized occupancy there.
    Per alpha the status is ``degenerate`` when pi* and pi_beta* agree on
    every visited state, ``skipped`` when the threshold condition fails,
    ``premise-unmet`` when J(pi*) - alpha D < J(pi_beta), and otherwise
    ``pass`` or ``fail`` on the improvement itself.
    """
    constants = constants or BoundConstants()
    model = empirical_mdp(dataset, mdp)
    size = model.num_states
    star = _as_policy(pi_star).with_states(size)
    behavior_star = _as_policy(pi_beta_star).with_states(size)
    behavior = _as_policy(pi_beta).with_states(size)

    weights = state_occupancy(model, behavior_star, task).normalized()
    star_rows, behavior_star_rows = _rows(star, task), _rows(behavior_star, task)
    tv = _weighted(weights, total_variation(star_rows, behavior_star_rows))
    divergence = _weighted(weights, d_cql_rows(star_rows, behavior_star_rows))

    c = constants.resolved_lemma1_c(mdp.discount)
    r_max = constants.resolved_r_max(mdp)
    tv_term = c * r_max / (1.0 - mdp.discount) * tv
    j_star = exact_policy_evaluation(model, star, task)
    j_behavior = exact_policy_evaluation(model, behavior, task)
    j_behavior_star = exact_policy_evaluation(model, behavior_star, task)

    rows = []
    for alpha in alphas:
        if alpha < 0:
            raise PreconditionError(f"alpha must be nonnegative, got {alpha}")
        divergence_term = alpha * divergence if alpha > 0 else 0.0
        condition = tv_term <= divergence_term
        premise = j_star - divergence_term >= j_behavior - _tolerance(j_behavior)
        if tv == 0:
            status = LEMMA1_DEGENERATE
        elif not condition:
            status = LEMMA1_SKIPPED
        elif not premise:
            status = LEMMA1_PREMISE_UNMET
        elif j_behavior_star >= j_behavior - _tolerance(j_behavior):
            status = LEMMA1_PASS
        else:
            status = LEMMA1_FAIL
        rows.append(Lemma1Row(float(alpha), tv_term, divergence_term, bool(condition), bool(premise), status))

    return Lemma1Report(
        task=task,
        c=c,
        r_max=r_max,
        total_variation=tv,
        divergence=divergence,
        threshold_alpha=lemma1_threshold(tv_term, divergence),
        j_star=j_star,
        j_behavior=j_behavior,
        j_behavior_star=j_behavior_star,
        rows=rows,
    )


@dataclass(frozen=True)
class Lemma2Report:
    """
    Both sides of the sampling-error inequality.

    ``rhs_bound`` is sqrt(1 + eps) sqrt(E_d[1/n]), which Cauchy-Schwarz
    guarantees; ``rhs_stated`` is sqrt(1 + eps) E_d[sqrt(1/n)], reported only.
    """
    lhs: float
    rhs_bound: float
    rhs_stated: float
    epsilon: float
    mean_divergence: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs_bound * (1.0 + LEMMA2_TOLERANCE)

    @property
    def stated_holds(self) -> bool:
        return self.lhs <= self.rhs_stated * (1.0 + LEMMA2_TOLERANCE)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'lhs': self.lhs,
            'rhs_bound': self.rhs_bound,
            'rhs_stated': self.rhs_stated,
            'epsilon': self.epsilon,
            'mean_divergence': self.mean_divergence,
            'holds': self.holds,
            'stated_holds': self.stated_holds,
        }


def check_lemma2(weights, divergences, counts, epsilon: float) -> Lemma2Report:
    """
    Raises:
        PreconditionError: if ``weights`` is not a distribution, a weighted
            state has no data, or E_d[D] exceeds ``epsilon``
    """
    d = np.asarray(weights, dtype=np.float64)
    divergence = np.asarray(divergences, dtype=np.float64)
    n = np.asarray(counts, dtype=np.float64)
    if not d.shape == divergence.shape == n.shape:
        raise PreconditionError("weights, divergences and counts must align")
    if (d < 0).any() or abs(d.sum() - 1.0) > 1e-9:
        raise PreconditionError("weights must be a probability vector")
    visited = d > 0
    if (n[visited] <= 0).any():
        raise PreconditionError("every weighted state needs a positive count")
    if (divergence[visited] < -LEMMA2_TOLERANCE).any():
        raise PreconditionError("divergences must be nonnegative")
    mean_divergence = float(np.sum(d[visited] * divergence[visited]))
    if mean_divergence > epsilon + LEMMA2_TOLERANCE:
        raise PreconditionError(f"E_d[D] = {mean_divergence!r} exceeds epsilon = {epsilon!r}")

    d, divergence, n = d[visited], divergence[visited], n[visited]
    scale = math.sqrt(1.0 + epsilon)
    return Lemma2Report(
        lhs=float(np.sum(d * np.sqrt((divergence + 1.0) / n))),
        rhs_bound=scale * math.sqrt(float(np.sum(d / n))),
        rhs_stated=scale * float(np.sum(d * np.sqrt(1.0 / n))),
        epsilon=float(epsilon),
        mean_divergence=mean_divergence,
    )

"""Tabular multi-task MDPs and exact solvers."""

from .multitask_mdp import (
    MultiTaskMdp, OccupancyMeasure, ProblemShape, TabularPolicy,
    ValidationIssue, ValidationReport, require_valid, validate_mdp,
)
from .solvers import (
    OptimalSolution, backup, exact_policy_evaluation, optimal_policy, optimal_return,
    policy_q_values, policy_values, state_occupancy, value_iteration,
)
from .empirical import empirical_mdp, has_absorbing_state, transition_counts

__all__ = [
    'MultiTaskMdp', 'OccupancyMeasure', 'ProblemShape', 'TabularPolicy',
    'ValidationIssue', 'ValidationReport', 'require_valid', 'validate_mdp',
    'OptimalSolution', 'backup', 'exact_policy_evaluation', 'optimal_policy', 'optimal_return',
    'policy_q_values', 'policy_values', 'state_occupancy', 'value_iteration',
    'empirical_mdp', 'has_absorbing_state', 'transition_counts',
]

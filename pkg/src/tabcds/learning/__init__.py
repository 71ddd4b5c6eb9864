"""
Offline learners on tabular data: CQL, BRAC and their shared pieces.

The multi-task training loop lives in ``tabcds.learning.trainer``; it depends
on ``tabcds.sharing``, which in turn imports the learners from here.
"""

from .config import LearnerConfig, LearnerKind, MuMode, WeightRule
from .behavior_policy import EmpiricalBehaviorPolicy, count_pairs, estimate_behavior_policy
from .q_table import ConservativeQTable, extract_policy, softmax_rows
from .fitting import q_cap, q_floor, stratified_batch, task_columns
from .cql import cql_fitted_iteration, cql_penalty, cql_sweep, penalty_distribution
from .brac import brac_fitted_iteration, clamped_kl

__all__ = [
    'LearnerConfig', 'LearnerKind', 'MuMode', 'WeightRule',
    'EmpiricalBehaviorPolicy', 'count_pairs', 'estimate_behavior_policy',
    'ConservativeQTable', 'extract_policy', 'softmax_rows',
    'q_cap', 'q_floor', 'stratified_batch', 'task_columns',
    'cql_fitted_iteration', 'cql_penalty', 'cql_sweep', 'penalty_distribution',
    'brac_fitted_iteration', 'clamped_kl',
]

"""Exact diagnostics: divergences, improvement-bound terms and comparison reports."""

from .divergences import (
    KL_SMOOTHING, DivergenceReport, d_cql, d_cql_rows, dataset_kl, dataset_state_distribution,
    kl_policy_divergence, policy_state_distribution, smooth_rows, total_variation,
)
from .bounds import (
    BoundConstants, BoundReport, Lemma1Report, Lemma1Row, Lemma2Report, check_lemma1, check_lemma2,
    compose_zeta, lemma1_threshold, sampling_error_term, spi_bound,
)
from .reports import RunSummary, ScenarioReport, scenario_report, weight_summary
from .rendering import lab_ramp, render_state_heatmap, render_weight_heatmaps, state_weight_means

__all__ = [
    'KL_SMOOTHING', 'DivergenceReport', 'd_cql', 'd_cql_rows', 'dataset_kl', 'dataset_state_distribution',
    'kl_policy_divergence', 'policy_state_distribution', 'smooth_rows', 'total_variation',
    'BoundConstants', 'BoundReport', 'Lemma1Report', 'Lemma1Row', 'Lemma2Report', 'check_lemma1',
    'check_lemma2', 'compose_zeta', 'lemma1_threshold', 'sampling_error_term', 'spi_bound',
    'RunSummary', 'ScenarioReport', 'scenario_report', 'weight_summary',
    'lab_ramp', 'render_state_heatmap', 'render_weight_heatmaps', 'state_weight_means',
]

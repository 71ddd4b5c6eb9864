"""Data-sharing strategies: routing baselines and conservative data sharing."""

from .strategies import (
    TEMPERATURE_PRESETS, SharingStrategy, StrategyKind, cds_basic, cds_quantile, cds_weighted, hipi,
    no_share, parse_strategy, share_all, skill,
)
from .rules import (
    basic_deltas, cds_delta_basic, cds_delta_quantile, hipi_route, hipi_routes, percentile,
    quantile_deltas, reference_values, skill_route,
)
from .weights import AdaptiveTemperature, CdsWeights, cds_weight, update_temperature
from .effective_dataset import (
    ADMISSION_COLUMNS, AdmissionTable, EffectiveDataset, build_all, build_effective_dataset,
)
from .objective import SubsetScore, best_admission_subset, sharing_objective, subset_objective

__all__ = [
    'TEMPERATURE_PRESETS', 'SharingStrategy', 'StrategyKind', 'cds_basic', 'cds_quantile', 'cds_weighted',
    'hipi', 'no_share', 'parse_strategy', 'share_all', 'skill',
    'basic_deltas', 'cds_delta_basic', 'cds_delta_quantile', 'hipi_route', 'hipi_routes', 'percentile',
    'quantile_deltas', 'reference_values', 'skill_route',
    'AdaptiveTemperature', 'CdsWeights', 'cds_weight', 'update_temperature',
    'ADMISSION_COLUMNS', 'AdmissionTable', 'EffectiveDataset', 'build_all', 'build_effective_dataset',
    'SubsetScore', 'best_admission_subset', 'sharing_objective', 'subset_objective',
]

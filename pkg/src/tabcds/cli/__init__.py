from tabcds.cli.commands import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_RUNTIME,
    aggregate_cells,
    bound_reports,
    cmd_analyze,
    cmd_evaluate,
    cmd_generate_data,
    cmd_sweep,
    cmd_train,
    evaluate_run,
    generate_datasets,
    load_scenario_data,
)
from tabcds.cli.config import ExperimentConfig, PlayRecipe, TaskRecipe, load_experiment_config

__all__ = [
    'EXIT_CONFIG', 'EXIT_OK', 'EXIT_RUNTIME', 'aggregate_cells', 'bound_reports',
    'cmd_analyze', 'cmd_evaluate', 'cmd_generate_data', 'cmd_sweep', 'cmd_train',
    'evaluate_run', 'generate_datasets', 'load_scenario_data',
    'ExperimentConfig', 'PlayRecipe', 'TaskRecipe', 'load_experiment_config',
]

"""Subcommand implementations: every function writes files and returns its exit code."""

from __future__ import annotations

import logging
import math
import os
import re
import shutil
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from tabcds.analysis.bounds import BoundConstants, spi_bound
from tabcds.analysis.reports import RunSummary, scenario_report, weight_summary
from tabcds.cli.config import ExperimentConfig
from tabcds.data.dataset_io import read_dataset, write_dataset
from tabcds.data.relabeling import goal_states, split_directed, split_undirected
from tabcds.data.rollouts import generate_task_dataset, play_trajectories
from tabcds.data.transitions import TaskDataset
from tabcds.errors import MissingArtifactError, PreconditionError
from tabcds.learning.behavior_policy import EmpiricalBehaviorPolicy, count_pairs
from tabcds.learning.config import LearnerKind
from tabcds.learning.trainer import train_multitask
from tabcds.mdp.multitask_mdp import MultiTaskMdp, TabularPolicy
from tabcds.mdp.solvers import exact_policy_evaluation, optimal_return
from tabcds.utils.file_output import atomic_write_text, read_json, write_csv, write_json
from tabcds.utils.seeding import derive_seed

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

MANIFEST_FILE = "manifest.json"
RUN_MANIFEST_FILE = "run_manifest.json"
MDP_FILE = "mdp.json"
CONFIDENCE_Z = 1.96
AGGREGATE_COLUMNS = ["strategy", "task", "metric", "mean", "median", "sd", "n", "half_width"]


def _task_file(task: int) -> str:
    return f"task{task}.jsonl"


def _effective_file(task: int) -> str:
    return f"effective_task{task}.jsonl"


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "-", text).strip("-")


# ---- data ----

def generate_datasets(config: ExperimentConfig) -> Tuple[MultiTaskMdp, List[TaskDataset]]:
    """Build the scenario MDP and every task's dataset from ``config.seed``."""
    mdp = config.build_mdp()
    if config.play is not None:
        play = config.play
        trajectories = play_trajectories(mdp, play.trajectories, derive_seed(config.seed, 'play'),
                                         horizon=play.horizon, noise=play.noise)
        split_seed = derive_seed(config.seed, 'split')
        if play.split == "undirected":
            datasets = split_undirected(trajectories, mdp.num_tasks, split_seed, mdp)
        else:
            datasets = split_directed(trajectories, goal_states(mdp), mdp, split_seed)
        return mdp, datasets
    datasets = []
    for recipe in config.tasks:
        seed = derive_seed(config.seed, 'datagen', recipe.task, recipe.seed)
        logger.info("generating %s data for task %d (%d transitions)", recipe.quality.value, recipe.task,
                    recipe.size)
        datasets.append(generate_task_dataset(mdp, recipe.task, recipe.quality, recipe.size, seed, config.behavior))
    return mdp, datasets


def write_scenario_data(out_dir: Path, config: ExperimentConfig, mdp: MultiTaskMdp,
                        datasets: Sequence[TaskDataset]) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out_dir / MDP_FILE, mdp.to_json())
    entries = []
    for dataset in datasets:
        write_dataset(out_dir / _task_file(dataset.task), dataset)
        entries.append({'task': dataset.task, 'file': _task_file(dataset.task), **dataset.manifest.to_dict()})
    return write_json(out_dir / MANIFEST_FILE, {
        'scenario': config.name,
        'seed': config.seed,
        'mdp': MDP_FILE,
        'datasets': entries,
        'config': config.to_dict(),
    })


def load_scenario_data(data_dir: Path) -> Tuple[MultiTaskMdp, List[TaskDataset]]:
    manifest_path = data_dir / MANIFEST_FILE
    if not manifest_path.is_file():
        raise MissingArtifactError(f"no {MANIFEST_FILE} in {data_dir}")
    manifest = read_json(manifest_path)
    mdp = _read_mdp(data_dir / manifest['mdp'])
    datasets = [read_dataset(data_dir / entry['file']) for entry in sorted(manifest['datasets'],
                                                                           key=lambda e: e['task'])]
    return mdp, datasets


def _read_mdp(path: Path) -> MultiTaskMdp:
    if not path.is_file():
        raise MissingArtifactError(f"MDP file not found: {path}")
    return MultiTaskMdp.from_json(path.read_text(encoding="utf-8"))


def cmd_generate_data(config: ExperimentConfig, out_dir: Path) -> int:
    mdp, datasets = generate_datasets(config)
    manifest = write_scenario_data(Path(out_dir), config, mdp, datasets)
    logger.info("wrote %d datasets and %s", len(datasets), manifest)
    return EXIT_OK


# ---- training ----

def _penalty_alpha(config: ExperimentConfig) -> float:
    if config.bound_alpha is not None:
        return config.bound_alpha
    return config.learner.alpha if config.learner.learner is LearnerKind.BRAC else config.learner.beta


def cmd_train(config: ExperimentConfig, strategy_text: str, out_dir: Path, data_dir: Optional[Path] = None) -> int:
    """Train one strategy and write its Q table, policy, logs and run manifest to ``out_dir``."""
    out_dir = Path(out_dir)
    if data_dir is not None:
        mdp, datasets = load_scenario_data(Path(data_dir))
        if mdp.num_tasks != config.num_tasks:
            raise PreconditionError(f"data in {data_dir} has {mdp.num_tasks} tasks, config has {config.num_tasks}")
    else:
        mdp, datasets = generate_datasets(config)
    strategy = config.strategy(strategy_text)
    train_seed = derive_seed(config.seed, 'train')
    logger.info("training %s with seed %d", strategy.tag, config.seed)
    result = train_multitask(mdp, datasets, strategy, config.learner, train_seed, kl_occupancy=config.kl_occupancy)

    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out_dir / MDP_FILE, mdp.to_json())
    write_json(out_dir / "q_table.json", result.q_table.to_dict())
    write_json(out_dir / "policy.json", result.policy.to_dict())
    write_csv(out_dir / "training_log.csv", result.log)
    admissions = result.admissions_frame()
    write_csv(out_dir / "admissions.csv", admissions)
    write_csv(out_dir / "weight_summary.csv", weight_summary(admissions))
    for effective, original in zip(result.effective, datasets):
        write_dataset(out_dir / _effective_file(effective.task), effective.as_task_dataset(original.manifest))
    if config.heatmaps and mdp.coords is not None:
        from tabcds.analysis.rendering import render_weight_heatmaps
        render_weight_heatmaps(admissions, datasets, mdp.coords, out_dir / "heatmaps", mdp.num_tasks)

    write_json(out_dir / RUN_MANIFEST_FILE, {
        'strategy': strategy.to_dict(),
        'seed': config.seed,
        'train_seed': train_seed,
        'data': str(data_dir) if data_dir is not None else "generated",
        'task_names': list(mdp.task_names),
        'returns': result.returns,
        'kl_div': result.kl,
        'optimal_returns': [optimal_return(mdp, task) for task in range(mdp.num_tasks)],
        'temperatures': None if result.temperature is None else list(result.temperature.taus),
        'bound_alpha': _penalty_alpha(config),
        'config': config.to_dict(),
    })
    logger.info("%s: J = %s", strategy.tag, ", ".join(f"{value:.4f}" for value in result.returns))
    return EXIT_OK


# ---- evaluation and analysis ----

def _read_run(run_dir: Path) -> Dict[str, Any]:
    path = run_dir / RUN_MANIFEST_FILE
    if not path.is_file():
        raise MissingArtifactError(f"no {RUN_MANIFEST_FILE} in {run_dir}")
    return read_json(path)


def _read_policy(run_dir: Path) -> TabularPolicy:
    path = run_dir / "policy.json"
    if not path.is_file():
        raise MissingArtifactError(f"policy file not found: {path}")
    return TabularPolicy.from_dict(read_json(path))


def evaluate_run(run_dir: Path) -> Dict[str, Any]:
    mdp = _read_mdp(run_dir / MDP_FILE)
    policy = _read_policy(run_dir)
    returns = [exact_policy_evaluation(mdp, policy, task) for task in range(mdp.num_tasks)]
    optimal = [optimal_return(mdp, task) for task in range(mdp.num_tasks)]
    return {
        'task_names': list(mdp.task_names),
        'returns': returns,
        'optimal_returns': optimal,
        'normalized': [r / o if o > 0 else math.nan for r, o in zip(returns, optimal)],
        'average_return': float(np.mean(returns)),
    }


def cmd_evaluate(run_dir: Path) -> int:
    run_dir = Path(run_dir)
    evaluation = evaluate_run(run_dir)
    write_json(run_dir / "evaluation.json", evaluation)
    for name, value, best in zip(evaluation['task_names'], evaluation['returns'], evaluation['optimal_returns']):
        logger.info("%s: J = %.6f (optimal %.6f)", name, value, best)
    return EXIT_OK


def _constants(manifest: Dict[str, Any]) -> BoundConstants:
    config = manifest['config']
    return BoundConstants(
        c_sample=config['constants']['c_sample'],
        r_max=config['constants']['r_max'],
        smoothing=config['evaluation']['kl_smoothing'],
        lemma1_c=config['constants']['lemma1_c'],
    )


def bound_reports(run_dir: Path) -> List[Dict[str, Any]]:
    """zeta for every task of a finished run, against its own effective datasets."""
    manifest = _read_run(run_dir)
    mdp = _read_mdp(run_dir / MDP_FILE)
    policy = _read_policy(run_dir)
    constants = _constants(manifest)
    reports = []
    for task in range(mdp.num_tasks):
        effective = read_dataset(run_dir / _effective_file(task))
        own = effective.origins == task
        shape = (mdp.num_states, mdp.num_actions)
        behavior = EmpiricalBehaviorPolicy.from_counts(
            count_pairs(effective.states[own], effective.actions[own], *shape)[None])
        behavior_star = EmpiricalBehaviorPolicy.from_counts(count_pairs(effective.states, effective.actions, *shape)[None])
        report = spi_bound(mdp, policy, behavior, behavior_star, effective, task,
                           alpha=manifest['bound_alpha'], constants=constants)
        reports.append(report.to_dict())
    return reports


def _summary(manifest: Dict[str, Any], label: str) -> RunSummary:
    return RunSummary(label=label, returns=manifest['returns'], kl=manifest['kl_div'],
                      strategy=manifest['strategy']['kind'], seed=manifest['seed'])


def cmd_analyze(run_dirs: Sequence[Path], out_dir: Path) -> int:
    """Comparison tables across runs plus one bound report per run."""
    if not run_dirs:
        raise PreconditionError("analyze needs at least one run directory")
    out_dir = Path(out_dir)
    manifests = [(Path(run_dir), _read_run(Path(run_dir))) for run_dir in run_dirs]
    tags = [manifest['strategy']['tag'] for _, manifest in manifests]
    labels = [tag if tags.count(tag) == 1 else f"{tag}@seed{manifest['seed']}"
              for tag, (_, manifest) in zip(tags, manifests)]
    if len(manifests) >= 2:
        report = scenario_report([_summary(m, label) for (_, m), label in zip(manifests, labels)],
                                 task_names=manifests[0][1]['task_names'])
        report.write(out_dir)
        for strategy, tasks in report.kl_above_baseline.items():
            if tasks:
                logger.info("%s KL exceeds %s on: %s", strategy, report.baseline, ", ".join(tasks))
    else:
        logger.info("one run given; skipping the comparison table")

    violated = False
    for (run_dir, _), label in zip(manifests, labels):
        reports = bound_reports(run_dir)
        write_json(out_dir / f"bounds_{_slug(label)}.json", {'run': str(run_dir), 'label': label, 'tasks': reports})
        violated |= not all(r['holds'] for r in reports)
    if violated:
        logger.warning("J(pi*) - J(pi_beta) >= -zeta failed for at least one task")
    return EXIT_OK


# ---- sweeps ----

def _generate_cell_data(config: ExperimentConfig, data_dir: Path) -> Path:
    mdp, datasets = generate_datasets(config)
    return write_scenario_data(data_dir, config, mdp, datasets)


def _run_cell(config: ExperimentConfig, strategy_text: str, data_dir: Path, final_dir: Path,
              scratch_dir: Path) -> Dict[str, Any]:
    """Train into a private directory, then move it into place."""
    cell = {'seed': config.seed, 'strategy': strategy_text}
    try:
        if scratch_dir.exists():
            shutil.rmtree(scratch_dir)
        cmd_train(config, strategy_text, scratch_dir, data_dir=data_dir)
        reports = bound_reports(scratch_dir)
        write_json(scratch_dir / "bounds.json", {'tasks': reports})
        if final_dir.exists():
            shutil.rmtree(final_dir)
        final_dir.parent.mkdir(parents=True, exist_ok=True)
        os.replace(scratch_dir, final_dir)
        manifest = _read_run(final_dir)
        cell.update(status="ok", tag=manifest['strategy']['tag'], returns=manifest['returns'],
                    kl_div=manifest['kl_div'], bound_holds=all(r['holds'] for r in reports))
    except Exception as exc:
        logger.debug("cell seed=%s strategy=%s raised", config.seed, strategy_text, exc_info=True)
        cell.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    return cell


def _failed_cell(seed: int, strategy_text: str, exc: BaseException) -> Dict[str, Any]:
    return {'seed': seed, 'strategy': strategy_text, 'status': "failed", 'error': f"{type(exc).__name__}: {exc}"}


def aggregate_cells(cells: Sequence[Dict[str, Any]], task_names: Sequence[str]) -> pd.DataFrame:
    """
    Mean, median, sample sd, n and the 1.96 sd / sqrt(n) half-width per
    (strategy, task, metric); sd is 0 for a single seed.
    """
    rows = []
    for cell in cells:
        if cell['status'] != "ok":
            continue
        for metric, key in (('J', 'returns'), ('kl_div', 'kl_div')):
            values = list(cell[key])
            for name, value in zip(task_names, values):
                rows.append({'strategy': cell['tag'], 'task': name, 'metric': metric, 'value': value})
            rows.append({'strategy': cell['tag'], 'task': 'average', 'metric': metric,
                         'value': float(np.mean(values))})
    if not rows:
        return pd.DataFrame(columns=AGGREGATE_COLUMNS)
    frame = pd.DataFrame(rows)
    out = []
    for (strategy, task, metric), group in frame.groupby(['strategy', 'task', 'metric'], sort=False):
        values = group['value'].to_numpy(dtype=np.float64)
        n = len(values)
        sd = float(np.std(values, ddof=1)) if n > 1 else 0.0
        out.append({
            'strategy': strategy,
            'task': task,
            'metric': metric,
            'mean': float(np.mean(values)),
            'median': float(np.median(values)),
            'sd': sd,
            'n': n,
            'half_width': CONFIDENCE_Z * sd / math.sqrt(n),
        })
    return pd.DataFrame(out, columns=AGGREGATE_COLUMNS)


def cmd_sweep(config: ExperimentConfig, out_dir: Path, seeds: Optional[Sequence[int]] = None,
              strategies: Optional[Sequence[str]] = None, jobs: int = 1) -> int:
    """
    Run every (seed, strategy) cell. Failed cells are recorded and the sweep
    carries on; the exit code is nonzero if any cell failed.
    """
    out_dir = Path(out_dir)
    seeds = list(seeds if seeds is not None else config.seeds)
    strategies = list(strategies if strategies is not None else config.strategies)
    if not seeds or not strategies:
        raise PreconditionError("a sweep needs at least one seed and one strategy")
    for text in strategies:
        config.strategy(text)
    jobs = max(1, int(jobs))

    data_dirs = {seed: out_dir / "data" / f"seed{seed}" for seed in seeds}
    cells: List[Dict[str, Any]] = []
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        data_futures = {seed: pool.submit(_generate_cell_data, config.with_seed(seed), data_dirs[seed])
                        for seed in seeds}
        ready = []
        for seed, future in data_futures.items():
            try:
                future.result()
                ready.append(seed)
            except Exception as exc:
                logger.error("data generation failed for seed %d: %s: %s", seed, type(exc).__name__, exc)
                cells.extend(_failed_cell(seed, text, exc) for text in strategies)
        pending = []
        for seed in ready:
            for text in strategies:
                name = f"{_slug(text)}_seed{seed}"
                try:
                    future = pool.submit(_run_cell, config.with_seed(seed), text, data_dirs[seed],
                                         out_dir / "cells" / name, out_dir / ".scratch" / name)
                except Exception as exc:
                    cells.append(_failed_cell(seed, text, exc))
                    continue
                pending.append((seed, text, future))
        for seed, text, future in pending:
            try:
                cells.append(future.result())
            except Exception as exc:
                cells.append(_failed_cell(seed, text, exc))

    cells.sort(key=lambda cell: (cell['seed'], strategies.index(cell['strategy'])))
    task_names = list(config.build_mdp().task_names)
    aggregate = aggregate_cells(cells, task_names)
    write_csv(out_dir / "sweep_aggregate.csv", aggregate)
    write_json(out_dir / "sweep.json", {'seeds': seeds, 'strategies': strategies, 'cells': cells,
                                        'config': config.to_dict()})
    scratch = out_dir / ".scratch"
    if scratch.exists() and not any(scratch.iterdir()):
        scratch.rmdir()
    failures = [cell for cell in cells if cell['status'] != "ok"]
    for cell in failures:
        logger.error("cell seed=%s strategy=%s failed: %s", cell['seed'], cell['strategy'], cell['error'])
    logger.info("sweep finished: %d cells, %d failed", len(cells), len(failures))
    return EXIT_RUNTIME if failures else EXIT_OK

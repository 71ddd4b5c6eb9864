"""Cross-strategy comparison tables and CDS weight summaries."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from tabcds.errors import PreconditionError
from tabcds.utils.file_output import PathLike, write_csv, write_json

AVERAGE_ROW = "average"
WEIGHT_SUMMARY_COLUMNS = ["origin", "target", "count", "mean_weight", "admitted_fraction"]


@dataclass(frozen=True)
class RunSummary:
    """Per-task exact return and KL of one trained run."""
    label: str
    returns: Tuple[float, ...]
    kl: Tuple[float, ...]
    strategy: str = ""
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, 'returns', tuple(float(v) for v in self.returns))
        object.__setattr__(self, 'kl', tuple(float(v) for v in self.kl))
        if len(self.returns) != len(self.kl):
            raise PreconditionError(f"run {self.label}: {len(self.returns)} returns but {len(self.kl)} KL values")

    @property
    def num_tasks(self) -> int:
        return len(self.returns)


@dataclass(frozen=True, eq=False)
class ScenarioReport:
    """
    Wide tables (one row per task plus an average row, one column per run)
    for returns and KL, and the tasks where a run's KL exceeds the baseline's.
    """
    returns: pd.DataFrame
    divergences: pd.DataFrame
    kl_above_baseline: Dict[str, List[str]] = field(default_factory=dict)
    baseline: Optional[str] = None

    @property
    def labels(self) -> List[str]:
        return [column for column in self.returns.columns if column != 'task']

    def long_frame(self) -> pd.DataFrame:
        returns = self.returns.melt(id_vars='task', var_name='strategy', value_name='J')
        divergences = self.divergences.melt(id_vars='task', var_name='strategy', value_name='kl_div')
        return returns.merge(divergences, on=['task', 'strategy'], sort=False)[['strategy', 'task', 'J', 'kl_div']]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'baseline': self.baseline,
            'strategies': self.labels,
            'returns': self.returns.to_dict(orient='records'),
            'kl_div': self.divergences.to_dict(orient='records'),
            'kl_above_baseline': self.kl_above_baseline,
        }

    def write(self, out_dir: PathLike, stem: str = "scenario") -> List[Path]:
        out_dir = Path(out_dir)
        return [
            write_csv(out_dir / f"{stem}_returns.csv", self.returns),
            write_csv(out_dir / f"{stem}_kl.csv", self.divergences),
            write_csv(out_dir / f"{stem}_long.csv", self.long_frame()),
            write_json(out_dir / f"{stem}.json", self.to_dict()),
        ]


def _wide(runs: Sequence[RunSummary], task_names: Sequence[str], attribute: str) -> pd.DataFrame:
    frame = pd.DataFrame({'task': list(task_names)})
    for run in runs:
        frame[run.label] = list(getattr(run, attribute))
    average = {'task': AVERAGE_ROW}
    average.update({run.label: float(np.mean(getattr(run, attribute))) for run in runs})
    return pd.concat([frame, pd.DataFrame([average])], ignore_index=True)


def scenario_report(
    runs: Sequence[RunSummary],
    task_names: Optional[Sequence[str]] = None,
    baseline: str = "NoShare",
) -> ScenarioReport:
    """
    Compare runs of at least two strategies on one scenario.

    Raises:
        PreconditionError: for fewer than two runs, duplicate labels or
            runs over different task counts
    """
    if len(runs) < 2:
        raise PreconditionError("a comparison needs at least two runs")
    labels = [run.label for run in runs]
    if len(set(labels)) != len(labels):
        raise PreconditionError(f"duplicate run labels: {labels}")
    num_tasks = runs[0].num_tasks
    if any(run.num_tasks != num_tasks for run in runs):
        raise PreconditionError("runs cover different numbers of tasks")
    task_names = list(task_names) if task_names is not None else [f"task{i}" for i in range(num_tasks)]
    if len(task_names) != num_tasks:
        raise PreconditionError(f"{len(task_names)} task names for {num_tasks} tasks")

    flags: Dict[str, List[str]] = {}
    reference = next((run for run in runs if run.label == baseline), None)
    if reference is not None:
        for run in runs:
            if run is reference:
                continue
            flags[run.label] = [name for name, mine, base in zip(task_names, run.kl, reference.kl) if mine > base]
    return ScenarioReport(
        returns=_wide(runs, task_names, 'returns'),
        divergences=_wide(runs, task_names, 'kl'),
        kl_above_baseline=flags,
        baseline=baseline if reference is not None else None,
    )


def weight_summary(admissions: pd.DataFrame) -> pd.DataFrame:
    """
    Mean CDS weight and admission rate per (origin task -> target task) pair,
    highest mean weight first.
    """
    if admissions.empty:
        return pd.DataFrame(columns=WEIGHT_SUMMARY_COLUMNS)
    effective = admissions['weight'] * admissions['admitted']
    grouped = admissions.assign(effective=effective).groupby(['origin', 'target'], sort=True)
    summary = pd.DataFrame({
        'count': grouped.size(),
        'mean_weight': grouped['effective'].mean(),
        'admitted_fraction': grouped['admitted'].mean(),
    }).reset_index()
    summary = summary.sort_values('mean_weight', ascending=False, kind='mergesort').reset_index(drop=True)
    return summary[WEIGHT_SUMMARY_COLUMNS]

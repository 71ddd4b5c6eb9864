"""
Line-oriented dataset files.

Line 1 is a JSON header ``{"format", "version", "task", "manifest"}``; every
following line is one record ``[s, a, r, s_next, done, origin_task]``.
Floats are written with ``repr`` precision so files round-trip exactly.
"""

import json
from pathlib import Path
from typing import List, Union

from tabcds.data.transitions import DatasetManifest, TaskDataset
from tabcds.errors import DatasetFormatError, MissingArtifactError
from tabcds.utils.file_output import atomic_write_text

DATASET_FORMAT = "tabcds-dataset"
DATASET_FORMAT_VERSION = 1


def dumps_dataset(dataset: TaskDataset) -> str:
    header = {
        'format': DATASET_FORMAT,
        'version': DATASET_FORMAT_VERSION,
        'task': int(dataset.task),
        'manifest': dataset.manifest.to_dict(),
    }
    lines = [json.dumps(header, sort_keys=True)]
    for s, a, r, s_next, done, origin in zip(dataset.states.tolist(), dataset.actions.tolist(),
                                             dataset.rewards.tolist(), dataset.next_states.tolist(),
                                             dataset.dones.tolist(), dataset.origins.tolist()):
        lines.append(json.dumps([s, a, r, s_next, done, origin]))
    return "\n".join(lines) + "\n"


def loads_dataset(text: str) -> TaskDataset:
    lines = text.splitlines()
    if not lines:
        raise DatasetFormatError("empty dataset file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"unreadable header: {exc}") from exc
    if header.get('format') != DATASET_FORMAT or header.get('version') != DATASET_FORMAT_VERSION:
        raise DatasetFormatError(f"unsupported dataset header {header.get('format')!r} v{header.get('version')!r}")
    columns: List[list] = [[], [], [], [], [], []]
    for number, line in enumerate(lines[1:], start=2):
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"line {number}: {exc}") from exc
        if not isinstance(record, list) or len(record) != 6:
            raise DatasetFormatError(f"line {number}: expected 6 fields")
        for column, value in zip(columns, record):
            column.append(value)
    states, actions, rewards, next_states, dones, origins = columns
    return TaskDataset(
        task=int(header['task']),
        states=states,
        actions=actions,
        rewards=[float(r) for r in rewards],
        next_states=next_states,
        dones=dones,
        origins=origins,
        manifest=DatasetManifest.from_dict(header['manifest']),
    )


def write_dataset(path: Union[str, Path], dataset: TaskDataset) -> Path:
    return atomic_write_text(path, dumps_dataset(dataset))


def read_dataset(path: Union[str, Path]) -> TaskDataset:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"dataset file not found: {path}")
    return loads_dataset(path.read_text(encoding="utf-8"))

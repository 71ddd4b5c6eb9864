"""Deterministic, atomic file writers used by every command."""

import json
import os
from pathlib import Path
from typing import Any, Union

import numpy as np
import pandas as pd

PathLike = Union[str, Path]


def _to_builtin(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def stable_json(payload: Any) -> str:
    """Serialize with sorted keys and a trailing newline so reruns are byte-identical."""
    return json.dumps(payload, sort_keys=True, indent=2, default=_to_builtin) + "\n"


def atomic_write_text(path: PathLike, text: str) -> Path:
    """Write to a sibling temporary file, then move it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)
    os.replace(tmp, path)
    return path


def write_json(path: PathLike, payload: Any) -> Path:
    return atomic_write_text(path, stable_json(payload))


def read_json(path: PathLike) -> Any:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def write_csv(path: PathLike, frame: pd.DataFrame) -> Path:
    """UTF-8, comma-delimited, header row, ``\\n`` line endings, no index column."""
    return atomic_write_text(path, frame.to_csv(index=False, lineterminator="\n"))

"""PNG heatmaps of per-state quantities on grid-shaped MDPs."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from tabcds.errors import PreconditionError
from tabcds.utils.file_output import PathLike

logger = logging.getLogger(__name__)

RGB = Tuple[int, int, int]

LOW_COLOR = "#f7fbff"
HIGH_COLOR = "#08306b"
EMPTY_COLOR: RGB = (200, 200, 200)


def lab_ramp(steps: int, low: str = LOW_COLOR, high: str = HIGH_COLOR) -> List[RGB]:
    """
    ``steps`` colours interpolated linearly in CIE Lab between two hex colours.
    """
    # Delayed import - colormath is only needed when rendering
    from colormath.color_conversions import convert_color
    from colormath.color_objects import LabColor, sRGBColor

    if steps < 2:
        raise PreconditionError("a ramp needs at least two steps")
    start = convert_color(sRGBColor.new_from_rgb_hex(low), LabColor)
    end = convert_color(sRGBColor.new_from_rgb_hex(high), LabColor)
    start_lab = np.array(start.get_value_tuple())
    end_lab = np.array(end.get_value_tuple())
    ramp = []
    for t in np.linspace(0.0, 1.0, steps):
        lab = LabColor(*((1.0 - t) * start_lab + t * end_lab))
        rgb = convert_color(lab, sRGBColor)
        ramp.append(tuple(int(round(255 * c)) for c in (rgb.clamped_rgb_r, rgb.clamped_rgb_g, rgb.clamped_rgb_b)))
    return ramp


def render_state_heatmap(
    values: Sequence[float],
    coords: np.ndarray,
    path: PathLike,
    cell_size: int = 24,
    value_range: Tuple[float, float] = (0.0, 1.0),
    ramp: Optional[List[RGB]] = None,
) -> Path:
    """
    Paint one square per state at its (x, y) cell; NaN values are grey.

    States with negative coordinates (the absorbing state) are skipped.
    """
    from PIL import Image, ImageDraw

    values = np.asarray(values, dtype=np.float64)
    coords = np.asarray(coords, dtype=np.int64)
    if coords.shape != (len(values), 2):
        raise PreconditionError(f"need one (x, y) per state, got {coords.shape} for {len(values)} values")
    ramp = ramp or lab_ramp(64)
    low, high = value_range
    if not high > low:
        raise PreconditionError("value range must be increasing")

    placed = (coords >= 0).all(axis=1)
    width = int(coords[placed, 0].max()) + 1
    height = int(coords[placed, 1].max()) + 1
    image = Image.new("RGB", (width * cell_size, height * cell_size), EMPTY_COLOR)
    draw = ImageDraw.Draw(image)
    for state in np.flatnonzero(placed):
        value = values[state]
        if np.isnan(value):
            continue
        level = (min(max(value, low), high) - low) / (high - low)
        color = ramp[int(round(level * (len(ramp) - 1)))]
        x, y = coords[state]
        # Row 0 at the bottom.
        top = (height - 1 - y) * cell_size
        draw.rectangle([x * cell_size, top, (x + 1) * cell_size - 1, top + cell_size - 1], fill=color)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    image.save(path, format="PNG")
    logger.debug("wrote heatmap %s", path)
    return path


def state_weight_means(admissions: pd.DataFrame, datasets: Sequence, num_states: int, target: int) -> np.ndarray:
    """Mean admitted weight of ``target``'s candidates per source state; NaN where none."""
    rows = admissions[admissions['target'] == target]
    sums = np.zeros(num_states)
    counts = np.zeros(num_states)
    for origin, group in rows.groupby('origin', sort=True):
        states = np.asarray(datasets[int(origin)].states)[group['transition_index'].to_numpy()]
        weights = (group['weight'] * group['admitted']).to_numpy(dtype=np.float64)
        sums += np.bincount(states, weights=weights, minlength=num_states)
        counts += np.bincount(states, minlength=num_states)
    out = np.full(num_states, np.nan)
    np.divide(sums, counts, out=out, where=counts > 0)
    return out


def render_weight_heatmaps(admissions: pd.DataFrame, datasets: Sequence, coords: np.ndarray, out_dir: PathLike,
                           num_tasks: int, cell_size: int = 24) -> List[Path]:
    """One ``weights_task{i}.png`` per target task."""
    coords = np.asarray(coords)
    ramp = lab_ramp(64)
    paths = []
    for target in range(num_tasks):
        means = state_weight_means(admissions, datasets, len(coords), target)
        paths.append(render_state_heatmap(means, coords, Path(out_dir) / f"weights_task{target}.png", cell_size,
                                          ramp=ramp))
    return paths

"""Named random substreams derived from one root seed."""

from typing import Dict

import numpy as np

# Stable ids; appending a stream never shifts the others.
STREAM_IDS: Dict[str, int] = {
    'datagen': 1,
    'train': 2,
    'eval': 3,
    'play': 4,
    'split': 5,
}


def substream(root_seed: int, name: str, *extra: int) -> np.random.Generator:
    """Return the generator for stream ``name`` (plus optional integer tags)."""
    if name not in STREAM_IDS:
        raise KeyError(f"Unknown random stream: {name}")
    return np.random.default_rng([int(root_seed), STREAM_IDS[name], *[int(e) for e in extra]])


def derive_seed(root_seed: int, name: str, *extra: int) -> int:
    """A reproducible 32-bit integer seed for components that take plain ints."""
    if name not in STREAM_IDS:
        raise KeyError(f"Unknown random stream: {name}")
    sequence = np.random.SeedSequence([int(root_seed), STREAM_IDS[name], *[int(e) for e in extra]])
    return int(sequence.generate_state(1)[0])

"""Synthetic mini-fixture in the upstream serialized format.

Lets CI exercise the converter end-to-end without the real multi-GB
dataset: a handful of classes/SNRs with a few random float32 frames each.
"""

from __future__ import annotations

import pickle
from pathlib import Path

import numpy as np

from .converter import KNOWN_CLASSES
from .sigds import FRAME_LEN


def make_fixture(path, classes: int = 2, snrs: int = 3, frames: int = 4,
                 seed: int = 0) -> Path:
    """Write a pickled key->array mapping; returns the path."""
    names = KNOWN_CLASSES[:classes]
    grid = list(range(-20, -20 + 2 * snrs, 2))
    rng = np.random.default_rng(seed)
    data = {}
    for name in names:
        for snr in grid:
            data[(name, snr)] = rng.standard_normal(
                (frames, 2, FRAME_LEN)).astype(np.float32)
    path = Path(path)
    with open(path, "wb") as f:
        pickle.dump(data, f, protocol=4)
    return path

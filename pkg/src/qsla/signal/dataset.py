"""Synthetic dataset generation and stratified splitting.

Frames are laid out in (class, SNR, index) order. Each (class, SNR) cell
draws from an independent counter-based RNG stream keyed by the run seed
and the cell coordinates, so serial and parallel generation produce
identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from .channel import ChannelConfig, apply_offsets, awgn_channel
from .frames import FRAME_LEN, SNR_GRID, IQFrame
from .modulators import CLASS_NAMES, frame_source, get_scheme, modulate

MIN_FRAMES_PER_CELL = 10

# Sub-stream tags so generation and splitting never share a stream.
_GEN_STREAM = 0
_SPLIT_STREAM = 1


@dataclass
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def validate(self, n_frames: int) -> None:
        all_idx = np.concatenate([self.train, self.val, self.test])
        if len(all_idx) != n_frames or len(np.unique(all_idx)) != n_frames:
            raise ConfigError("split indices must be disjoint and cover all frames")


@dataclass
class DatasetMeta:
    class_names: tuple[str, ...]
    snr_grid: tuple[int, ...]
    seed: int | None = None


@dataclass
class SignalDataset:
    """Column-oriented frame store plus split indices and metadata."""

    iq: np.ndarray          # (n, 2, L) float32
    labels: np.ndarray      # (n,) uint32, index into meta.class_names
    snrs: np.ndarray        # (n,) int32
    meta: DatasetMeta
    split: Split | None = None

    def __len__(self) -> int:
        return len(self.labels)

    def frame(self, i: int) -> IQFrame:
        return IQFrame(self.iq[i], int(self.labels[i]), int(self.snrs[i]))

    def iter_frames(self):
        for i in range(len(self)):
            yield self.frame(i)

    def subset_arrays(self, indices: np.ndarray):
        idx = np.asarray(indices)
        return self.iq[idx], self.labels[idx], self.snrs[idx]


def _cell_rng(seed: int, stream: int, cell_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream, cell_index))
    return np.random.default_rng(np.random.Philox(ss))


def generate_frame(class_name: str, snr_db: int, rng: np.random.Generator,
                   channel: ChannelConfig | None = None) -> np.ndarray:
    """One (2, L) float32 frame: modulate, apply impairments, add noise."""
    scheme = get_scheme(class_name)
    s = modulate(scheme, frame_source(scheme, rng))
    if channel is not None:
        s = apply_offsets(s, channel, rng)
    s = awgn_channel(s, snr_db, rng)
    return np.stack([s.real, s.imag]).astype(np.float32)


def generate_dataset(classes, snrs, frames_per_cell: int, seed: int,
                     channel: ChannelConfig | None = None,
                     split_ratio_check: bool = True) -> SignalDataset:
    """Balanced frames for every (class, SNR) cell, with a stratified split.

    Deterministic under (arguments, seed); class ids follow the sorted
    order of the requested class names.
    """
    classes = sorted(classes)
    for name in classes:
        get_scheme(name)
    snrs = list(snrs)
    for snr in snrs:
        if snr not in SNR_GRID:
            raise ConfigError(f"snr_db {snr} not on the +/-20 dB grid")
    if frames_per_cell < MIN_FRAMES_PER_CELL:
        raise ConfigError(
            f"frames_per_cell must be >= {MIN_FRAMES_PER_CELL}, got {frames_per_cell}"
        )
    n_cells = len(classes) * len(snrs)
    n = n_cells * frames_per_cell
    iq = np.empty((n, 2, FRAME_LEN), dtype=np.float32)
    labels = np.empty(n, dtype=np.uint32)
    snr_col = np.empty(n, dtype=np.int32)
    pos = 0
    for ci, name in enumerate(classes):
        for si, snr in enumerate(snrs):
            cell = ci * len(snrs) + si
            rng = _cell_rng(seed, _GEN_STREAM, cell)
            for _ in range(frames_per_cell):
                iq[pos] = generate_frame(name, snr, rng, channel)
                labels[pos] = ci
                snr_col[pos] = snr
                pos += 1
    meta = DatasetMeta(tuple(classes), tuple(snrs), seed)
    ds = SignalDataset(iq, labels, snr_col, meta)
    ds.split = split_dataset(ds, seed)
    if split_ratio_check:
        ds.split.validate(n)
    return ds


def split_counts(n: int) -> tuple[int, int, int]:
    """8:1:1 sizes for one cell of n frames (val and test rounded, train rest)."""
    n_val = int(round(n / 10.0))
    n_test = int(round(n / 10.0))
    return n - n_val - n_test, n_val, n_test


def stratified_split_from_cells(cell_sizes, seed: int) -> Split:
    """8:1:1 split given per-cell frame counts laid out contiguously.

    Works purely on index arithmetic so callers can validate full-scale
    split sizes without materializing frames.
    """
    train, val, test = [], [], []
    start = 0
    for cell, size in enumerate(cell_sizes):
        if size < MIN_FRAMES_PER_CELL:
            raise ConfigError(
                f"cell {cell} has {size} frames; need >= {MIN_FRAMES_PER_CELL} to stratify"
            )
        rng = _cell_rng(seed, _SPLIT_STREAM, cell)
        perm = start + rng.permutation(size)
        n_train, n_val, n_test = split_counts(size)
        train.append(perm[:n_train])
        val.append(perm[n_train : n_train + n_val])
        test.append(perm[n_train + n_val :])
        start += size
    return Split(
        np.sort(np.concatenate(train)).astype(np.uint64),
        np.sort(np.concatenate(val)).astype(np.uint64),
        np.sort(np.concatenate(test)).astype(np.uint64),
    )


def split_dataset(ds: SignalDataset, seed: int) -> Split:
    """Stratified 8:1:1 split over the dataset's (class, SNR) cells."""
    # Frames are stored grouped by cell in (class, SNR, index) order, so
    # cells are the runs of identical (label, snr) pairs.
    sizes: list[int] = []
    current: tuple[int, int] | None = None
    for lab, snr in zip(ds.labels.tolist(), ds.snrs.tolist()):
        key = (lab, snr)
        if key != current:
            sizes.append(0)
            current = key
        sizes[-1] += 1
    split = stratified_split_from_cells(sizes, seed)
    split.validate(len(ds))
    return split

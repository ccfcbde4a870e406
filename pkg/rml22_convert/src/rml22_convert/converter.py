"""Upstream RML22 pickle -> .sigds conversion and verification.

The upstream distribution is a pickled dict mapping (modulation name,
snr_db) to a float32 array of frames shaped (n, 2, 128). Conversion is a
pure function of (input bytes, split seed): class ids follow the sorted
class-name order, frames are written in (class, SNR, original index)
order bit-identically, and the 8:1:1 stratified split uses a fixed,
documented seed, so the output CRC is stable across runs and machines.
"""

from __future__ import annotations

import pickle
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sigds import (
    FRAME_LEN,
    FormatError,
    encode_dataset,
    encode_splits,
    read_sigds,
    splits_path,
)

KNOWN_CLASSES = ("8PSK", "AM-DSB", "BPSK", "CPFSK", "GFSK", "PAM4",
                 "QAM16", "QAM64", "QPSK", "WBFM")
SNR_GRID = tuple(range(-20, 22, 2))
FULL_CLASS_COUNT = 10
FULL_SNR_COUNT = 21
DEFAULT_SPLIT_SEED = 2022  # fixed so conversion output is reproducible


class SchemaError(ValueError):
    """Upstream object does not match the key->array mapping contract."""


class UnknownClassError(SchemaError):
    """A modulation key is not one of the published class names."""


class FrameShapeError(SchemaError):
    """A frame array is not (n, 2, 128) float32."""


class SnrGridError(SchemaError):
    """An SNR key is off the -20..20 dB step-2 grid."""


def load_upstream(path) -> dict[tuple[str, int], np.ndarray]:
    """Parse and validate the upstream serialized key->array mapping."""
    path = Path(path)
    with open(path, "rb") as f:
        try:
            data = pickle.load(f)
        except UnicodeDecodeError:
            f.seek(0)
            data = pickle.load(f, encoding="latin1")
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: expected a dict, got {type(data).__name__}")
    out: dict[tuple[str, int], np.ndarray] = {}
    for key, value in data.items():
        if not (isinstance(key, tuple) and len(key) == 2):
            raise SchemaError(f"{path}: key {key!r} is not a (name, snr) pair")
        name, snr = key
        if name not in KNOWN_CLASSES:
            raise UnknownClassError(
                f"{path}: unknown modulation {name!r}; known: {KNOWN_CLASSES}"
            )
        snr = int(snr)
        if snr not in SNR_GRID:
            raise SnrGridError(f"{path}: snr {snr} off the -20..20 step-2 grid")
        arr = np.asarray(value)
        if arr.ndim != 3 or arr.shape[1:] != (2, FRAME_LEN):
            raise FrameShapeError(
                f"{path}: frames for {key} have shape {arr.shape},"
                f" expected (n, 2, {FRAME_LEN})"
            )
        if arr.dtype != np.float32:
            raise FrameShapeError(
                f"{path}: frames for {key} are {arr.dtype}; float32 required"
                " for bit-identical conversion"
            )
        out[(name, snr)] = arr
    if not out:
        raise SchemaError(f"{path}: mapping is empty")
    return out


def _stratified_split(cell_sizes, seed: int):
    """8:1:1 per cell over contiguously laid-out frames."""
    train, val, test = [], [], []
    start = 0
    for cell, size in enumerate(cell_sizes):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(cell,))
        )
        perm = start + rng.permutation(size)
        n_val = int(round(size / 10.0))
        n_test = int(round(size / 10.0))
        n_train = size - n_val - n_test
        train.append(perm[:n_train])
        val.append(perm[n_train : n_train + n_val])
        test.append(perm[n_train + n_val :])
        start += size
    return (np.sort(np.concatenate(train)), np.sort(np.concatenate(val)),
            np.sort(np.concatenate(test)))


def convert(in_path, out_path, split_seed: int = DEFAULT_SPLIT_SEED) -> int:
    """Write `<out_path>` (.sigds) and its `.splits` sidecar; returns the CRC."""
    records = load_upstream(in_path)
    class_names = sorted({name for name, _ in records})
    snr_grid = sorted({snr for _, snr in records})
    blocks = []
    labels = []
    snrs = []
    cell_sizes = []
    for label, name in enumerate(class_names):
        for snr in snr_grid:
            arr = records.get((name, snr))
            if arr is None:
                raise SchemaError(
                    f"missing cell ({name}, {snr}): every class must cover"
                    " the same SNR grid"
                )
            blocks.append(arr)
            labels.append(np.full(len(arr), label, dtype=np.uint32))
            snrs.append(np.full(len(arr), snr, dtype=np.int32))
            cell_sizes.append(len(arr))
    iq = np.concatenate(blocks, axis=0)
    labels = np.concatenate(labels)
    snr_col = np.concatenate(snrs)
    raw = encode_dataset(class_names, snr_grid, iq, labels, snr_col)
    crc = int.from_bytes(raw[-4:], "little")
    out_path = Path(out_path)
    out_path.write_bytes(raw)
    train, val, test = _stratified_split(cell_sizes, split_seed)
    splits_path(out_path).write_bytes(encode_splits(train, val, test, crc))
    return crc


@dataclass
class VerifySummary:
    frames: int
    class_names: list[str]
    snr_grid: list[int]
    cell_counts: dict[tuple[str, int], int]
    crc: int
    problems: list[str]

    @property
    def ok(self) -> bool:
        return not self.problems

    def lines(self) -> list[str]:
        out = [
            f"frames: {self.frames}",
            f"classes ({len(self.class_names)}): {', '.join(self.class_names)}",
            f"snr grid ({len(self.snr_grid)}): {self.snr_grid}",
            f"crc32: {self.crc:#010x}",
        ]
        counts = sorted(set(self.cell_counts.values()))
        out.append(f"frames per cell: {counts[0] if len(counts) == 1 else counts}")
        out += [f"PROBLEM: {p}" for p in self.problems]
        return out


def verify(sigds_path) -> VerifySummary:
    """Check structural invariants of a converted file (CRC is validated by
    the decoder; breaches are listed, not raised)."""
    content = read_sigds(Path(sigds_path))
    problems = []
    for name in content.class_names:
        if name not in KNOWN_CLASSES:
            problems.append(f"unknown class name {name!r}")
    for snr in content.snr_grid:
        if snr not in SNR_GRID:
            problems.append(f"snr {snr} off grid")
    if content.labels.size and content.labels.max() >= len(content.class_names):
        problems.append("label id outside the class table")
    cells: dict[tuple[str, int], int] = {}
    for name_idx, snr in zip(content.labels.tolist(), content.snrs.tolist()):
        cells[(content.class_names[name_idx], snr)] = (
            cells.get((content.class_names[name_idx], snr), 0) + 1
        )
    expected_cells = len(content.class_names) * len(content.snr_grid)
    if len(cells) != expected_cells:
        problems.append(f"{len(cells)} populated cells, expected {expected_cells}")
    if len(set(cells.values())) > 1:
        problems.append(f"unbalanced cells: {sorted(set(cells.values()))}")
    return VerifySummary(
        frames=len(content.labels),
        class_names=content.class_names,
        snr_grid=content.snr_grid,
        cell_counts=cells,
        crc=content.crc,
        problems=problems,
    )

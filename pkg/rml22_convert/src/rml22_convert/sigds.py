"""Writer/reader for the portable .sigds dataset format and its sidecar.

Byte layout (little-endian throughout):

    magic "SIGDS\\0" | version u16 | class-count u16
    per class: name-length u16, UTF-8 name
    snr-count u16 | snr values i32
    frame-count u64
    per frame: 256 f32 (I row then Q row), label u32, snr_db i32
    crc32 u32 over every preceding byte

Sidecar `<stem>.splits`: magic "SIGSP\\0" | version u16 | dataset crc u32 |
three blocks (train/val/test) of u64 count + u64 indices.

This module is intentionally self-contained: the format definition is the
only contract shared with consumers of these files.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DATASET_MAGIC = b"SIGDS\x00"
SPLIT_MAGIC = b"SIGSP\x00"
FORMAT_VERSION = 1
FRAME_LEN = 128
FRAME_RECORD_BYTES = 2 * FRAME_LEN * 4 + 4 + 4


class FormatError(ValueError):
    """Structural problem in a .sigds/.splits byte stream."""


@dataclass
class SigdsContent:
    class_names: list[str]
    snr_grid: list[int]
    iq: np.ndarray        # (n, 2, 128) float32
    labels: np.ndarray    # (n,) uint32
    snrs: np.ndarray      # (n,) int32
    crc: int


def encode_dataset(class_names, snr_grid, iq, labels, snrs) -> bytes:
    iq = np.ascontiguousarray(iq, dtype="<f4")
    n = len(labels)
    buf = bytearray()
    buf += DATASET_MAGIC
    buf += struct.pack("<H", FORMAT_VERSION)
    buf += struct.pack("<H", len(class_names))
    for name in class_names:
        raw = name.encode("utf-8")
        buf += struct.pack("<H", len(raw)) + raw
    buf += struct.pack("<H", len(snr_grid))
    for snr in snr_grid:
        buf += struct.pack("<i", int(snr))
    buf += struct.pack("<Q", n)
    record = np.dtype([("iq", "<f4", (2, FRAME_LEN)), ("label", "<u4"),
                       ("snr", "<i4")])
    rows = np.empty(n, dtype=record)
    rows["iq"] = iq
    rows["label"] = labels
    rows["snr"] = snrs
    buf += rows.tobytes()
    buf += struct.pack("<I", zlib.crc32(bytes(buf)))
    return bytes(buf)


def encode_splits(train, val, test, dataset_crc: int) -> bytes:
    buf = bytearray()
    buf += SPLIT_MAGIC
    buf += struct.pack("<H", FORMAT_VERSION)
    buf += struct.pack("<I", dataset_crc)
    for part in (train, val, test):
        arr = np.asarray(part, dtype="<u8")
        buf += struct.pack("<Q", len(arr))
        buf += arr.tobytes()
    return bytes(buf)


def decode_dataset(raw: bytes) -> SigdsContent:
    if raw[: len(DATASET_MAGIC)] != DATASET_MAGIC:
        raise FormatError("bad magic: not a .sigds file")
    stored_crc = struct.unpack("<I", raw[-4:])[0]
    if zlib.crc32(raw[:-4]) != stored_crc:
        raise FormatError("crc mismatch: payload corrupted or truncated")
    pos = len(DATASET_MAGIC)

    def take(n):
        nonlocal pos
        if pos + n > len(raw) - 4:
            raise FormatError("truncated header")
        piece = raw[pos : pos + n]
        pos += n
        return piece

    (version,) = struct.unpack("<H", take(2))
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}")
    (n_classes,) = struct.unpack("<H", take(2))
    names = []
    for _ in range(n_classes):
        (ln,) = struct.unpack("<H", take(2))
        names.append(take(ln).decode("utf-8"))
    (n_snrs,) = struct.unpack("<H", take(2))
    snr_grid = [struct.unpack("<i", take(4))[0] for _ in range(n_snrs)]
    (n_frames,) = struct.unpack("<Q", take(8))
    body = take(n_frames * FRAME_RECORD_BYTES)
    if pos != len(raw) - 4:
        raise FormatError("trailing bytes after frame records")
    record = np.dtype([("iq", "<f4", (2, FRAME_LEN)), ("label", "<u4"),
                       ("snr", "<i4")])
    rows = np.frombuffer(body, dtype=record)
    return SigdsContent(
        class_names=names,
        snr_grid=snr_grid,
        iq=np.array(rows["iq"], dtype=np.float32),
        labels=np.array(rows["label"], dtype=np.uint32),
        snrs=np.array(rows["snr"], dtype=np.int32),
        crc=stored_crc,
    )


def splits_path(dataset_path) -> Path:
    return Path(dataset_path).with_suffix(".splits")


def read_sigds(path) -> SigdsContent:
    return decode_dataset(Path(path).read_bytes())

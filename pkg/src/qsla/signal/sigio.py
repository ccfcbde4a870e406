"""The .sigds portable dataset format and its .splits sidecar.

Layout (all little-endian):

    magic "SIGDS\\0" | version u16 | class-count u16
    per class: name-length u16, UTF-8 name
    snr-count u16 | snr values i32
    frame-count u64
    per frame: 256 f32 (I row then Q row), label u32, snr_db i32
    crc32 u32 over every preceding byte

Sidecar `<stem>.splits`:

    magic "SIGSP\\0" | version u16 | dataset crc u32
    three blocks (train/val/test): count u64, indices u64

Round trips are bit-exact; readers raise a distinct error for a bad magic,
unsupported version, truncation, and checksum mismatch.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from ..errors import (
    BadMagicError,
    ChecksumError,
    DataError,
    TruncatedFileError,
    VersionError,
)
from .dataset import DatasetMeta, SignalDataset, Split
from .frames import FRAME_LEN

DATASET_MAGIC = b"SIGDS\x00"
SPLIT_MAGIC = b"SIGSP\x00"
FORMAT_VERSION = 1

_FRAME_DTYPE = np.dtype(
    [("iq", "<f4", (2, FRAME_LEN)), ("label", "<u4"), ("snr", "<i4")]
)
FRAME_RECORD_BYTES = _FRAME_DTYPE.itemsize  # 1032


def splits_path(dataset_path) -> Path:
    return Path(dataset_path).with_suffix(".splits")


def dataset_to_bytes(ds: SignalDataset) -> bytes:
    buf = bytearray()
    buf += DATASET_MAGIC
    buf += struct.pack("<H", FORMAT_VERSION)
    buf += struct.pack("<H", len(ds.meta.class_names))
    for name in ds.meta.class_names:
        raw = name.encode("utf-8")
        buf += struct.pack("<H", len(raw)) + raw
    buf += struct.pack("<H", len(ds.meta.snr_grid))
    for snr in ds.meta.snr_grid:
        buf += struct.pack("<i", snr)
    buf += struct.pack("<Q", len(ds))
    records = np.empty(len(ds), dtype=_FRAME_DTYPE)
    records["iq"] = ds.iq
    records["label"] = ds.labels
    records["snr"] = ds.snrs
    buf += records.tobytes()
    buf += struct.pack("<I", zlib.crc32(bytes(buf)))
    return bytes(buf)


def dataset_crc(ds: SignalDataset) -> int:
    raw = dataset_to_bytes(ds)
    return struct.unpack("<I", raw[-4:])[0]


def split_to_bytes(split: Split, crc: int) -> bytes:
    buf = bytearray()
    buf += SPLIT_MAGIC
    buf += struct.pack("<H", FORMAT_VERSION)
    buf += struct.pack("<I", crc)
    for part in (split.train, split.val, split.test):
        arr = np.asarray(part, dtype="<u8")
        buf += struct.pack("<Q", len(arr))
        buf += arr.tobytes()
    return bytes(buf)


def write_dataset(ds: SignalDataset, path) -> int:
    """Write `<path>` and, when a split is attached, `<stem>.splits`.

    Returns the payload CRC (also printed by the CLI for provenance).
    """
    path = Path(path)
    raw = dataset_to_bytes(ds)
    crc = struct.unpack("<I", raw[-4:])[0]
    path.write_bytes(raw)
    if ds.split is not None:
        splits_path(path).write_bytes(split_to_bytes(ds.split, crc))
    return crc


class _Cursor:
    def __init__(self, raw: bytes, label: str):
        self.raw = raw
        self.pos = 0
        self.label = label

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise TruncatedFileError(
                f"{self.label}: expected {n} more bytes at offset {self.pos}"
            )
        out = self.raw[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def dataset_from_bytes(raw: bytes, label: str = "dataset") -> SignalDataset:
    if raw[: len(DATASET_MAGIC)] != DATASET_MAGIC:
        raise BadMagicError(f"{label}: not a .sigds file (bad magic)")
    if len(raw) < len(DATASET_MAGIC) + 2 + 4:
        raise TruncatedFileError(f"{label}: header incomplete")
    stored_crc = struct.unpack("<I", raw[-4:])[0]
    actual_crc = zlib.crc32(raw[:-4])
    if stored_crc != actual_crc:
        raise ChecksumError(
            f"{label}: crc mismatch (stored {stored_crc:#010x},"
            f" computed {actual_crc:#010x})"
        )
    cur = _Cursor(raw[:-4], label)
    cur.take(len(DATASET_MAGIC))
    (version,) = cur.unpack("<H")
    if version != FORMAT_VERSION:
        raise VersionError(f"{label}: unsupported format version {version}")
    (n_classes,) = cur.unpack("<H")
    names = []
    for _ in range(n_classes):
        (ln,) = cur.unpack("<H")
        names.append(cur.take(ln).decode("utf-8"))
    (n_snrs,) = cur.unpack("<H")
    snr_grid = [cur.unpack("<i")[0] for _ in range(n_snrs)]
    (n_frames,) = cur.unpack("<Q")
    body = cur.take(n_frames * FRAME_RECORD_BYTES)
    if cur.pos != len(cur.raw):
        raise DataError(f"{label}: {len(cur.raw) - cur.pos} trailing bytes")
    records = np.frombuffer(body, dtype=_FRAME_DTYPE)
    meta = DatasetMeta(tuple(names), tuple(snr_grid))
    return SignalDataset(
        iq=np.array(records["iq"], dtype=np.float32),
        labels=np.array(records["label"], dtype=np.uint32),
        snrs=np.array(records["snr"], dtype=np.int32),
        meta=meta,
    )


def split_from_bytes(raw: bytes, expected_crc: int, label: str = "splits") -> Split:
    if raw[: len(SPLIT_MAGIC)] != SPLIT_MAGIC:
        raise BadMagicError(f"{label}: not a .splits file (bad magic)")
    cur = _Cursor(raw, label)
    cur.take(len(SPLIT_MAGIC))
    (version,) = cur.unpack("<H")
    if version != FORMAT_VERSION:
        raise VersionError(f"{label}: unsupported format version {version}")
    (crc,) = cur.unpack("<I")
    if crc != expected_crc:
        raise ChecksumError(
            f"{label}: keyed to dataset crc {crc:#010x}, expected {expected_crc:#010x}"
        )
    parts = []
    for _ in range(3):
        (count,) = cur.unpack("<Q")
        body = cur.take(count * 8)
        parts.append(np.frombuffer(body, dtype="<u8").astype(np.uint64))
    if cur.pos != len(cur.raw):
        raise DataError(f"{label}: {len(cur.raw) - cur.pos} trailing bytes")
    return Split(*parts)


def read_dataset(path, require_split: bool = False) -> SignalDataset:
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset not found: {path}")
    raw = path.read_bytes()
    ds = dataset_from_bytes(raw, label=str(path))
    crc = zlib.crc32(raw[:-4])
    side = splits_path(path)
    if side.exists():
        ds.split = split_from_bytes(side.read_bytes(), crc, label=str(side))
        ds.split.validate(len(ds))
    elif require_split:
        raise DataError(f"missing split sidecar: {side}")
    return ds

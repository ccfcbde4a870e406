"""Weight manifests and the .qslaw binary format.

Layout (all little-endian):

    magic "QSLAW\\0" | version u16 | record-count u32
    per record: name-length u32, UTF-8 name, rank u32, dims u32 x rank,
                raw float32 values

Batch-norm running statistics travel as ordinary records whose names carry
a `.bn.` segment; they are not trainable parameters. A JSON sidecar
`<path>.json` stores the variant, the full model config, and the config
fingerprint; loading into a model with a different fingerprint is refused.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import (
    BadMagicError,
    DataError,
    FingerprintError,
    TruncatedFileError,
    VersionError,
)
from .config import QslaConfig, fingerprint

MANIFEST_MAGIC = b"QSLAW\x00"
MANIFEST_VERSION = 1


@dataclass
class WeightManifest:
    """Named float32 tensors (weights plus batch-norm state) and identity."""

    variant: str
    config: QslaConfig
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.variant, self.config)

    def add(self, name: str, values: np.ndarray) -> None:
        if name in self.tensors:
            raise DataError(f"duplicate manifest tensor {name!r}")
        self.tensors[name] = np.asarray(values, dtype=np.float32)

    def to_bytes(self) -> bytes:
        buf = bytearray()
        buf += MANIFEST_MAGIC
        buf += struct.pack("<H", MANIFEST_VERSION)
        buf += struct.pack("<I", len(self.tensors))
        for name, arr in self.tensors.items():
            raw = name.encode("utf-8")
            buf += struct.pack("<I", len(raw)) + raw
            buf += struct.pack("<I", arr.ndim)
            for d in arr.shape:
                buf += struct.pack("<I", d)
            buf += np.ascontiguousarray(arr, dtype="<f4").tobytes()
        return bytes(buf)

    def meta_json(self) -> str:
        return json.dumps(
            {
                "variant": self.variant,
                "config": self.config.to_dict(),
                "fingerprint": self.fingerprint,
            },
            indent=2,
            sort_keys=True,
        )

    def save(self, path) -> Path:
        path = Path(path)
        path.write_bytes(self.to_bytes())
        Path(str(path) + ".json").write_text(self.meta_json() + "\n")
        return path


def tensors_from_bytes(raw: bytes, label: str = "manifest") -> dict[str, np.ndarray]:
    if raw[: len(MANIFEST_MAGIC)] != MANIFEST_MAGIC:
        raise BadMagicError(f"{label}: not a .qslaw file (bad magic)")
    pos = len(MANIFEST_MAGIC)

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(raw):
            raise TruncatedFileError(f"{label}: truncated at offset {pos}")
        out = raw[pos : pos + n]
        pos += n
        return out

    (version,) = struct.unpack("<H", take(2))
    if version != MANIFEST_VERSION:
        raise VersionError(f"{label}: unsupported manifest version {version}")
    (count,) = struct.unpack("<I", take(4))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        dims = struct.unpack(f"<{rank}I", take(4 * rank)) if rank else ()
        n_vals = int(np.prod(dims)) if rank else 1
        values = np.frombuffer(take(4 * n_vals), dtype="<f4").reshape(dims)
        if name in tensors:
            raise DataError(f"{label}: duplicate tensor {name!r}")
        tensors[name] = np.array(values, dtype=np.float32)
    if pos != len(raw):
        raise DataError(f"{label}: {len(raw) - pos} trailing bytes")
    return tensors


def load_manifest(path) -> WeightManifest:
    path = Path(path)
    if not path.exists():
        raise DataError(f"manifest not found: {path}")
    meta_path = Path(str(path) + ".json")
    if not meta_path.exists():
        raise DataError(f"manifest sidecar not found: {meta_path}")
    meta = json.loads(meta_path.read_text())
    config = QslaConfig.from_dict(meta["config"])
    manifest = WeightManifest(meta["variant"], config)
    expected = meta.get("fingerprint")
    if expected != manifest.fingerprint:
        raise FingerprintError(
            f"{meta_path}: fingerprint {expected!r} does not match config"
            f" ({manifest.fingerprint})"
        )
    manifest.tensors = tensors_from_bytes(path.read_bytes(), label=str(path))
    return manifest

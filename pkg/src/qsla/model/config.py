"""Architecture configuration and the variant registry."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

from ..errors import ConfigError

VARIANTS = ("qsla", "only-bilstm", "only-attention", "refcnn")


@dataclass(frozen=True)
class QslaConfig:
    """Knobs for the network family.

    width_scale shrinks the convolutional filter count and the LSTM cell
    count proportionally (desk-scale training); the layer topology is
    unchanged and full-width accounting always uses width_scale=1.
    """

    conv_filters: int = 128
    conv_kernel: int = 3
    fusion_kernel: int = 1
    pool_stride: int = 3
    lstm_cells: int = 128
    dropout_p: float = 0.5
    l2_coeff: float = 1e-4
    num_classes: int = 10
    input_length: int = 128
    width_scale: float = 1.0

    def __post_init__(self):
        for name in ("conv_filters", "conv_kernel", "fusion_kernel",
                     "pool_stride", "lstm_cells", "input_length"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.width_scale <= 0:
            raise ConfigError("width_scale must be positive")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError("dropout_p must lie in [0, 1)")
        if self.l2_coeff < 0:
            raise ConfigError("l2_coeff must be non-negative")
        if self.num_classes < 2:
            raise ConfigError("num_classes must be at least 2")
        if self.conv_kernel % 2 == 0:
            raise ConfigError("conv_kernel must be odd (same padding)")
        for name in ("conv_filters", "lstm_cells"):
            scaled = getattr(self, name) * self.width_scale
            if abs(scaled - round(scaled)) > 1e-9 or round(scaled) < 1:
                raise ConfigError(
                    f"width_scale * {name} must be a positive integer, got {scaled}"
                )

    @property
    def filters(self) -> int:
        return int(round(self.conv_filters * self.width_scale))

    @property
    def cells(self) -> int:
        return int(round(self.lstm_cells * self.width_scale))

    @property
    def pooled_length(self) -> int:
        return self.input_length // self.pool_stride

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "QslaConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


def check_variant(variant: str) -> str:
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    return variant


def fingerprint(variant: str, config: QslaConfig) -> str:
    """Stable 16-hex-digit digest of (variant, config) for manifest matching."""
    payload = json.dumps({"variant": variant, "config": config.to_dict()},
                         sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

"""Channel impairments: AWGN at a target SNR plus optional static offsets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .frames import SNR_GRID


@dataclass(frozen=True)
class ChannelConfig:
    """AWGN is always applied; the offsets are off by default."""

    phase_offset: bool = False          # uniform static carrier phase
    max_freq_offset: float = 0.0        # cycles/sample, <= 1e-3

    def __post_init__(self):
        if not 0.0 <= self.max_freq_offset <= 1e-3:
            raise ConfigError("max_freq_offset must lie in [0, 1e-3]")


def awgn_channel(x: np.ndarray, snr_db: int, rng: np.random.Generator) -> np.ndarray:
    """Add circular complex Gaussian noise for a unit-power input.

    Total noise variance is 10^(-snr/10), split equally across I and Q.
    """
    if snr_db not in SNR_GRID:
        raise ConfigError(f"snr_db {snr_db} not on the +/-20 dB grid")
    sigma2 = 10.0 ** (-snr_db / 10.0)
    scale = np.sqrt(sigma2 / 2.0)
    noise = scale * (rng.standard_normal(len(x)) + 1j * rng.standard_normal(len(x)))
    return x + noise


def apply_offsets(x: np.ndarray, config: ChannelConfig,
                  rng: np.random.Generator) -> np.ndarray:
    """Static carrier phase and/or normalized frequency offset, if enabled."""
    if not config.phase_offset and config.max_freq_offset == 0.0:
        return x
    phi = rng.uniform(0.0, 2 * np.pi) if config.phase_offset else 0.0
    f_off = (
        rng.uniform(-config.max_freq_offset, config.max_freq_offset)
        if config.max_freq_offset > 0.0
        else 0.0
    )
    n = np.arange(len(x))
    return x * np.exp(1j * (2 * np.pi * f_off * n + phi))

"""Frame containers and the four-view transform fed to the network.

A frame is 128 complex baseband samples stored as two float32 rows
(in-phase, then quadrature). The preprocessing step derives the
amplitude/phase pair and splits out the individual rails, giving the four
input views: A/phi, IQ, I, Q.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ShapeError

FRAME_LEN = 128
SNR_GRID = tuple(range(-20, 22, 2))
NUM_CLASSES = 10


@dataclass
class IQFrame:
    """One labelled baseband signal: iq rows (2, 128), class id, SNR tag."""

    iq: np.ndarray
    label: int
    snr_db: int

    def __post_init__(self):
        self.iq = np.asarray(self.iq, dtype=np.float32)
        if self.iq.shape != (2, FRAME_LEN):
            raise ShapeError(f"IQFrame: iq must be (2, {FRAME_LEN}), got {self.iq.shape}")
        if not np.all(np.isfinite(self.iq)):
            raise ShapeError("IQFrame: iq contains non-finite values")
        if not 0 <= self.label < NUM_CLASSES:
            raise ConfigError(f"IQFrame: label {self.label} outside [0, {NUM_CLASSES})")
        if self.snr_db not in SNR_GRID:
            raise ConfigError(f"IQFrame: snr_db {self.snr_db} not on the +/-20 dB grid")


@dataclass
class QuadView:
    """The four network input views derived from one frame."""

    a_phi: np.ndarray  # (2, L): amplitude row, phase row
    iq: np.ndarray     # (2, L)
    i: np.ndarray      # (1, L)
    q: np.ndarray      # (1, L)


def amplitude_phase(i: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Amplitude and four-quadrant phase of (I, Q), phase in (-pi, pi].

    The origin maps to phase 0 by the atan2 convention.
    """
    amp = np.sqrt(i * i + q * q)
    phi = np.arctan2(q, i)
    phi = np.where(phi <= -np.pi, phi + 2 * np.pi, phi)
    return amp, phi


def quad_preprocess(frame: IQFrame) -> QuadView:
    """Split one frame into the A/phi, IQ, I and Q views."""
    i, q = frame.iq[0], frame.iq[1]
    amp, phi = amplitude_phase(i, q)
    a_phi = np.stack([amp, phi]).astype(np.float32)
    return QuadView(
        a_phi=a_phi,
        iq=frame.iq.copy(),
        i=frame.iq[0:1].copy(),
        q=frame.iq[1:2].copy(),
    )


def quad_views_batch(iq: np.ndarray) -> dict[str, np.ndarray]:
    """Vectorized preprocessing of a (N, 2, L) batch into the four views."""
    iq = np.asarray(iq)
    if iq.ndim != 3 or iq.shape[1] != 2:
        raise ShapeError(f"quad_views_batch expects (N, 2, L), got {iq.shape}")
    amp, phi = amplitude_phase(iq[:, 0], iq[:, 1])
    a_phi = np.stack([amp, phi], axis=1).astype(iq.dtype, copy=False)
    return {
        "a_phi": a_phi,
        "iq": iq,
        "i": iq[:, 0:1],
        "q": iq[:, 1:2],
    }

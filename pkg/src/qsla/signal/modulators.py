"""Waveform synthesis for the ten modulation classes.

Linear digital schemes (PSK/PAM/QAM) are Gray-mapped onto unit-average-
energy constellations, upsampled and root-raised-cosine shaped. GFSK and
CPFSK are continuous-phase FM of the bit stream. AM-DSB and WBFM modulate
a synthetic band-limited audio-like source. Every frame is normalized to
unit average power on output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeError
from .frames import FRAME_LEN

DEFAULT_SPS = 8
RRC_ROLLOFF = 0.35
RRC_SPAN = 8          # filter length in symbols (one-sided span = RRC_SPAN/2)
CPM_INDEX = 0.5       # modulation index for GFSK/CPFSK
GFSK_BT = 0.35
FM_DEVIATION = 0.25   # peak frequency deviation, cycles/sample
AM_DEPTH = 0.5


def gray_code(n: int) -> int:
    return n ^ (n >> 1)


def _psk_points(order: int, offset: float) -> np.ndarray:
    """Constellation indexed by Gray label; angular neighbours differ in one bit."""
    pts = np.zeros(order, dtype=np.complex128)
    for pos in range(order):
        pts[gray_code(pos)] = np.exp(1j * (2 * np.pi * pos / order + offset))
    return pts


def _pam_levels(order: int) -> np.ndarray:
    return np.arange(-(order - 1), order, 2, dtype=np.float64)


def _pam_points(order: int) -> np.ndarray:
    levels = _pam_levels(order)
    scale = np.sqrt(np.mean(levels**2))
    pts = np.zeros(order, dtype=np.complex128)
    for pos, level in enumerate(levels):
        pts[gray_code(pos)] = level / scale
    return pts


def _qam_points(order: int) -> np.ndarray:
    """Square QAM with per-axis Gray labels: label = (gray(col), gray(row))."""
    side = int(round(np.sqrt(order)))
    if side * side != order:
        raise ConfigError(f"QAM order must be a perfect square, got {order}")
    levels = _pam_levels(side)
    scale = np.sqrt(2.0 * np.mean(levels**2))
    half_bits = side.bit_length() - 1
    pts = np.zeros(order, dtype=np.complex128)
    for col in range(side):
        for row in range(side):
            label = (gray_code(col) << half_bits) | gray_code(row)
            pts[label] = (levels[col] + 1j * levels[row]) / scale
    return pts


@dataclass(frozen=True)
class ModulationScheme:
    """One of the ten supported classes with its waveform parameters."""

    name: str
    kind: str                      # linear | cpm | analog
    bits_per_symbol: int = 0
    constellation: np.ndarray | None = field(default=None, repr=False)
    gaussian_bt: float | None = None   # CPM pre-filter; None = rectangular

    @property
    def is_digital(self) -> bool:
        return self.kind in ("linear", "cpm")


def _build_schemes() -> dict[str, ModulationScheme]:
    return {
        "BPSK": ModulationScheme("BPSK", "linear", 1, _psk_points(2, 0.0)),
        "QPSK": ModulationScheme("QPSK", "linear", 2, _psk_points(4, np.pi / 4)),
        "8PSK": ModulationScheme("8PSK", "linear", 3, _psk_points(8, 0.0)),
        "PAM4": ModulationScheme("PAM4", "linear", 2, _pam_points(4)),
        "QAM16": ModulationScheme("QAM16", "linear", 4, _qam_points(16)),
        "QAM64": ModulationScheme("QAM64", "linear", 6, _qam_points(64)),
        "GFSK": ModulationScheme("GFSK", "cpm", 1, gaussian_bt=GFSK_BT),
        "CPFSK": ModulationScheme("CPFSK", "cpm", 1),
        "AM-DSB": ModulationScheme("AM-DSB", "analog"),
        "WBFM": ModulationScheme("WBFM", "analog"),
    }


SCHEMES = _build_schemes()
CLASS_NAMES = tuple(sorted(SCHEMES))  # alphabetical; label id = position here


def get_scheme(name: str) -> ModulationScheme:
    try:
        return SCHEMES[name]
    except KeyError:
        raise ConfigError(
            f"unknown modulation class {name!r}; known: {', '.join(CLASS_NAMES)}"
        ) from None


def rrc_taps(beta: float, sps: int, span: int) -> np.ndarray:
    """Root-raised-cosine impulse response over `span` symbols."""
    n = span * sps
    t = (np.arange(n + 1) - n / 2) / sps
    taps = np.zeros_like(t)
    for k, ti in enumerate(t):
        if abs(ti) < 1e-12:
            taps[k] = 1.0 - beta + 4.0 * beta / np.pi
        elif abs(abs(4.0 * beta * ti) - 1.0) < 1e-9:
            taps[k] = (beta / np.sqrt(2.0)) * (
                (1 + 2 / np.pi) * np.sin(np.pi / (4 * beta))
                + (1 - 2 / np.pi) * np.cos(np.pi / (4 * beta))
            )
        else:
            num = np.sin(np.pi * ti * (1 - beta)) + 4 * beta * ti * np.cos(
                np.pi * ti * (1 + beta)
            )
            den = np.pi * ti * (1 - (4 * beta * ti) ** 2)
            taps[k] = num / den
    return taps / np.sqrt(np.sum(taps**2))


def gaussian_taps(bt: float, sps: int, span: int = 4) -> np.ndarray:
    """Gaussian frequency pulse, normalized to unit sum."""
    t = (np.arange(span * sps + 1) - span * sps / 2) / sps
    sigma = np.sqrt(np.log(2.0)) / (2.0 * np.pi * bt)
    taps = np.exp(-(t**2) / (2.0 * sigma**2))
    return taps / taps.sum()


def bits_to_symbols(bits: np.ndarray, scheme: ModulationScheme) -> np.ndarray:
    """Pack bits MSB-first into Gray labels and map to constellation points."""
    bps = scheme.bits_per_symbol
    if len(bits) % bps:
        raise ShapeError(f"{scheme.name}: bit count {len(bits)} not divisible by {bps}")
    groups = np.asarray(bits, dtype=np.int64).reshape(-1, bps)
    labels = np.zeros(len(groups), dtype=np.int64)
    for b in range(bps):
        labels = (labels << 1) | groups[:, b]
    return scheme.constellation[labels]


def symbols_needed(scheme: ModulationScheme, n_out: int = FRAME_LEN,
                   sps: int = DEFAULT_SPS) -> int:
    if scheme.kind == "linear":
        return n_out // sps + 2 * RRC_SPAN
    if scheme.kind == "cpm":
        return n_out // sps + 8
    raise ConfigError(f"{scheme.name} is analog; it consumes audio samples, not bits")


def source_bits_needed(scheme: ModulationScheme, n_out: int = FRAME_LEN,
                       sps: int = DEFAULT_SPS) -> int:
    return symbols_needed(scheme, n_out, sps) * scheme.bits_per_symbol


def audio_source(rng: np.random.Generator, n: int) -> np.ndarray:
    """Speech-band stand-in: five random sinusoids, low-passed, peak 1."""
    t = np.arange(n + 64, dtype=np.float64)
    freqs = rng.uniform(0.005, 0.08, 5)
    amps = rng.uniform(0.5, 1.0, 5)
    phases = rng.uniform(0.0, 2 * np.pi, 5)
    m = np.zeros_like(t)
    for f, a, p in zip(freqs, amps, phases):
        m += a * np.sin(2 * np.pi * f * t + p)
    # windowed-sinc lowpass, cutoff 0.06 cycles/sample
    k = np.arange(-16, 17, dtype=np.float64)
    lp = np.sinc(2 * 0.06 * k) * np.hamming(len(k))
    lp /= lp.sum()
    m = np.convolve(m, lp, mode="same")[32 : 32 + n]
    peak = np.max(np.abs(m))
    return m / peak if peak > 0 else m


def _shape_linear(symbols: np.ndarray, sps: int, n_out: int) -> np.ndarray:
    taps = rrc_taps(RRC_ROLLOFF, sps, RRC_SPAN)
    up = np.zeros(len(symbols) * sps, dtype=np.complex128)
    up[::sps] = symbols
    shaped = np.convolve(up, taps)
    start = RRC_SPAN * sps  # past both the group delay and the ramp-up
    if start + n_out > len(shaped):
        raise ShapeError("insufficient symbols for the requested output length")
    return shaped[start : start + n_out]


def _shape_cpm(bits: np.ndarray, scheme: ModulationScheme, sps: int,
               n_out: int) -> np.ndarray:
    nrz = np.repeat(2.0 * np.asarray(bits, dtype=np.float64) - 1.0, sps)
    if scheme.gaussian_bt is not None:
        nrz = np.convolve(nrz, gaussian_taps(scheme.gaussian_bt, sps), mode="same")
    phase = np.pi * CPM_INDEX * np.cumsum(nrz) / sps
    s = np.exp(1j * phase)
    start = 2 * sps  # skip the filter settle-in
    if start + n_out > len(s):
        raise ShapeError("insufficient bits for the requested output length")
    return s[start : start + n_out]


def _modulate_analog(scheme: ModulationScheme, audio: np.ndarray,
                     n_out: int) -> np.ndarray:
    if len(audio) < n_out:
        raise ShapeError(
            f"{scheme.name}: audio source has {len(audio)} samples, need {n_out}"
        )
    m = np.asarray(audio[:n_out], dtype=np.float64)
    if scheme.name == "AM-DSB":
        return (1.0 + AM_DEPTH * m).astype(np.complex128)
    phase = 2 * np.pi * FM_DEVIATION * np.cumsum(m)
    return np.exp(1j * phase)


def modulate(scheme: ModulationScheme, source: np.ndarray,
             sps: int = DEFAULT_SPS, n_out: int = FRAME_LEN) -> np.ndarray:
    """Produce `n_out` unit-power complex baseband samples from a source.

    `source` is a bit array for digital schemes and an audio waveform for
    the analog ones. Shaping transients are trimmed before the output
    window, so the source must satisfy `source_bits_needed` (digital) or
    provide n_out samples (analog).
    """
    if scheme.kind == "linear":
        need = source_bits_needed(scheme, n_out, sps)
        if len(source) < need:
            raise ShapeError(f"{scheme.name}: need {need} bits, got {len(source)}")
        symbols = bits_to_symbols(np.asarray(source[:need]), scheme)
        s = _shape_linear(symbols, sps, n_out)
    elif scheme.kind == "cpm":
        need = source_bits_needed(scheme, n_out, sps)
        if len(source) < need:
            raise ShapeError(f"{scheme.name}: need {need} bits, got {len(source)}")
        s = _shape_cpm(np.asarray(source[:need]), scheme, sps, n_out)
    elif scheme.kind == "analog":
        s = _modulate_analog(scheme, source, n_out)
    else:
        raise ConfigError(f"unknown scheme kind {scheme.kind!r}")
    power = np.mean(np.abs(s) ** 2)
    return s / np.sqrt(power)


def frame_source(scheme: ModulationScheme, rng: np.random.Generator,
                 n_out: int = FRAME_LEN, sps: int = DEFAULT_SPS) -> np.ndarray:
    """Draw a random source stream of the right kind and length for one frame."""
    if scheme.is_digital:
        return rng.integers(0, 2, source_bits_needed(scheme, n_out, sps))
    return audio_source(rng, n_out)

"""Total loudness in sone per analysis frame.

Chain per frame: power spectrum, outer-ear weighting, grouping into 24 Bark
bands, conversion to dB against a full-scale calibration, Schroeder
spreading across bands, then dB (read as phon) to sone and a Stevens-style
total. Frames are processed as a block with numpy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer, frame_signal
from .errors import InvalidParams

BARK_UPPER_EDGES_HZ = np.array(
    [100, 200, 300, 400, 510, 630, 770, 920, 1080, 1270, 1480, 1720,
     2000, 2320, 2700, 3150, 3700, 4400, 5300, 6400, 7700, 9500, 12000, 15500],
    dtype=float,
)
N_BANDS = len(BARK_UPPER_EDGES_HZ)
DB_FLOOR = -100.0
STEVENS_FACTOR = 0.15

# mean square of the periodic Hann window
_HANN_POWER = 0.375
_BLOCK = 512


@dataclass(frozen=True)
class LoudnessParams:
    window_length: int = 4096
    hop_length: int = 1024
    db_max: float = 96.0
    n_bands: int = N_BANDS

    def __post_init__(self):
        if self.window_length <= 0 or self.hop_length <= 0:
            raise InvalidParams("window_length and hop_length must be positive")
        if self.hop_length > self.window_length:
            raise InvalidParams("hop_length may not exceed window_length")
        if self.db_max <= 0:
            raise InvalidParams("db_max must be positive")
        if self.n_bands != N_BANDS:
            raise InvalidParams(f"n_bands is fixed at {N_BANDS}")


@dataclass(frozen=True)
class LoudnessFrame:
    time_s: float
    total_sone: float
    specific_sone: tuple[float, ...]


def outer_ear_weight_db(f_hz):
    """Terhardt's outer/middle-ear transfer function in dB."""
    f = np.asarray(f_hz, dtype=float) / 1000.0
    w = -3.64 * f ** -0.8 + 6.5 * np.exp(-0.6 * (f - 3.3) ** 2) - 1e-3 * f ** 4
    return float(w) if w.ndim == 0 else w


def band_index(freqs_hz: np.ndarray) -> np.ndarray:
    """Zero-based Bark band per frequency; anything above the top edge joins band 24."""
    idx = np.searchsorted(BARK_UPPER_EDGES_HZ, freqs_hz, side="left")
    return np.minimum(idx, N_BANDS - 1)


def bark_band_energies(power_spectrum: np.ndarray, sample_rate: int, n_fft: int | None = None) -> np.ndarray:
    """Sum (already weighted) rfft bin powers into the 24 bands.

    Accepts a single spectrum or a 2-D block of spectra (one per row).
    ``n_fft`` defaults to the even length implied by the bin count.
    """
    power = np.asarray(power_spectrum, dtype=float)
    n_bins = power.shape[-1]
    freqs = np.fft.rfftfreq(n_fft or 2 * (n_bins - 1), 1.0 / sample_rate)
    onehot = np.zeros((n_bins, N_BANDS))
    onehot[np.arange(n_bins), band_index(freqs)] = 1.0
    return power @ onehot


def spreading_db(x):
    """Schroeder spreading for a band distance ``x`` = maskee - masker."""
    x = np.asarray(x, dtype=float) + 0.474
    s = 15.81 + 7.5 * x - 17.5 * np.sqrt(1.0 + x * x)
    return float(s) if s.ndim == 0 else s


_DIST = np.subtract.outer(np.arange(N_BANDS), np.arange(N_BANDS))  # [i, j] = i - j
_SPREAD_LINEAR = 10.0 ** (spreading_db(_DIST) / 10.0)


def spread(bands_db: np.ndarray) -> np.ndarray:
    """out[i] = 10 log10(sum_j 10^((B_j + S(i - j)) / 10)); works row-wise on blocks."""
    linear = 10.0 ** (np.asarray(bands_db, dtype=float) / 10.0)
    return 10.0 * np.log10(linear @ _SPREAD_LINEAR.T)


def phon_to_sone(phon):
    p = np.asarray(phon, dtype=float)
    s = np.where(p >= 40.0, 2.0 ** ((p - 40.0) / 10.0), (np.maximum(p, 0.0) / 40.0) ** 2.642)
    return float(s) if s.ndim == 0 else s


def total_loudness(specific: np.ndarray) -> np.ndarray:
    peak = specific.max(axis=-1)
    return peak + STEVENS_FACTOR * (specific.sum(axis=-1) - peak)


def _power_spectra(frames: np.ndarray) -> np.ndarray:
    """One-sided bin powers; a full-scale sine sums to 1."""
    n = frames.shape[-1]
    spectrum = np.fft.rfft(frames, axis=-1)
    power = spectrum.real ** 2 + spectrum.imag ** 2
    power[..., 1 : (n + 1) // 2] *= 2.0
    return power / (n * n * 0.5 * _HANN_POWER)


def loudness_series(buffer: AudioBuffer, params: LoudnessParams | None = None) -> list[LoudnessFrame]:
    params = params or LoudnessParams()
    series = frame_signal(buffer, params.window_length, params.hop_length)
    n = params.window_length
    freqs = np.fft.rfftfreq(n, 1.0 / buffer.sample_rate_hz)
    gain = np.zeros_like(freqs)
    gain[1:] = 10.0 ** (outer_ear_weight_db(freqs[1:]) / 10.0)  # DC carries no loudness

    totals, specifics = [], []
    for start in range(0, len(series.frames), _BLOCK):
        block = series.frames[start : start + _BLOCK]
        energies = bark_band_energies(_power_spectra(block) * gain, buffer.sample_rate_hz, n)
        with np.errstate(divide="ignore"):
            level = 10.0 * np.log10(energies) + params.db_max
        level = np.maximum(level, DB_FLOOR)
        sone = phon_to_sone(spread(level))
        specifics.append(sone)
        totals.append(total_loudness(sone))
    total = np.concatenate(totals) if totals else np.zeros(0)
    specific = np.concatenate(specifics) if specifics else np.zeros((0, N_BANDS))
    return [
        LoudnessFrame(float(t), float(tot), tuple(float(v) for v in spec))
        for t, tot, spec in zip(series.frame_times, total, specific)
    ]

"""Per-region BOLD time-series augmentation.

A TimeSeries holds one subject's regional signal matrix (T timepoints x
N regions). The four augmentations — frequency-domain upsampling and
downsampling, random slicing, and Gaussian noise jittering — operate
independently per region, plus the overlapping 90%/90% segment pair used
for contrastive pretraining.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, RatioError
from .rng import SeededRng

__all__ = [
    "TimeSeries",
    "AugmentSpec",
    "upsample",
    "downsample",
    "random_slice",
    "jitter",
    "pretrain_pair",
    "apply_augment",
    "simulate_timeseries",
]


@dataclass
class TimeSeries:
    """Regional BOLD matrix, timepoints x regions."""

    values: np.ndarray
    repetition_hint: float | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.values.ndim != 2:
            raise DimensionError(f"time series must be 2-D, got ndim={self.values.ndim}")
        if self.values.shape[0] < 2:
            raise ValueError("time series needs at least 2 timepoints")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("time series contains non-finite values")

    @property
    def n_timepoints(self) -> int:
        return self.values.shape[0]

    @property
    def n_regions(self) -> int:
        return self.values.shape[1]


@dataclass
class AugmentSpec:
    """One BOLD augmentation step: method plus its parameters."""

    method: str
    ratio: float = 0.9
    noise_mean: float = 0.0
    noise_std: float = 0.0
    rng_stream: str = "bold-augment"

    METHODS = ("upsample", "downsample", "slice", "jitter")

    def __post_init__(self):
        if self.method not in self.METHODS:
            raise ValueError(f"unknown augmentation method {self.method!r}")
        if self.method in ("upsample", "downsample", "slice") and not 0 < self.ratio < 1:
            raise RatioError(f"ratio must be in (0,1), got {self.ratio}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")


def _check_ratio(r: float):
    if not 0 < r < 1:
        raise RatioError(f"ratio must lie strictly inside (0,1), got {r}")


def _resample_columns(x: np.ndarray, new_len: int) -> np.ndarray:
    """Fourier resampling of each column of x to new_len samples.

    The spectrum is zero-padded or truncated with conjugate symmetry kept
    intact; an even-length Nyquist bin is split in half on the way up and
    folded with its mirror on the way down, so real input stays exactly
    real and the operator is linear. The 1/T normalization makes bin 0
    carry the mean, so per-region means are preserved to rounding.
    """
    t = x.shape[0]
    spec = np.fft.fft(x, axis=0) / t
    out = np.zeros((new_len, x.shape[1]), dtype=complex)
    keep = min(t, new_len)
    half = (keep - 1) // 2  # strictly-below-Nyquist bins on each side
    out[: half + 1] = spec[: half + 1]
    if half > 0:
        out[-half:] = spec[-half:]
    if keep % 2 == 0:
        nyq = keep // 2
        if new_len > t:
            out[nyq] = spec[nyq] / 2
            out[new_len - nyq] = spec[nyq] / 2
        elif new_len < t:
            out[nyq] = spec[nyq] + spec[t - nyq]
        else:
            out[nyq] = spec[nyq]
    return np.fft.ifft(out * new_len, axis=0).real


def upsample(ts: TimeSeries, u: float) -> TimeSeries:
    """Stretch to floor(T/u) timepoints via spectral zero-padding, u in (0,1)."""
    _check_ratio(u)
    new_len = int(np.floor(ts.n_timepoints / u))
    return TimeSeries(_resample_columns(ts.values, new_len), ts.repetition_hint)


def downsample(ts: TimeSeries, b: float) -> TimeSeries:
    """Contract to floor(T*b) timepoints via spectral truncation, b in (0,1)."""
    _check_ratio(b)
    new_len = int(np.floor(ts.n_timepoints * b))
    if new_len < 2:
        raise RatioError(f"downsampling T={ts.n_timepoints} by b={b} leaves {new_len} < 2 points")
    return TimeSeries(_resample_columns(ts.values, new_len), ts.repetition_hint)


def random_slice(ts: TimeSeries, s: float, rng: SeededRng) -> TimeSeries:
    """Keep a contiguous segment of floor(T*s) points at a uniform random start."""
    _check_ratio(s)
    t = ts.n_timepoints
    seg = int(np.floor(t * s))
    if seg < 2:
        raise RatioError(f"slicing T={t} by s={s} leaves {seg} < 2 points")
    start = int(rng.gen.integers(0, t - seg + 1))
    return TimeSeries(ts.values[start : start + seg].copy(), ts.repetition_hint)


def jitter(ts: TimeSeries, mean: float, std: float, rng: SeededRng) -> TimeSeries:
    """Add i.i.d. Gaussian noise N(mean, std) to every sample.

    Noise is drawn independently per timepoint and per region.
    """
    if std < 0:
        raise ValueError("noise std must be >= 0")
    noise = mean + std * rng.gen.standard_normal(ts.values.shape)
    return TimeSeries(ts.values + noise, ts.repetition_hint)


def pretrain_pair(ts: TimeSeries) -> tuple[TimeSeries, TimeSeries]:
    """First-90% / last-90% segment pair for contrastive pretraining."""
    t = ts.n_timepoints
    if t < 10:
        raise ValueError(f"pretrain pair needs T >= 10, got {t}")
    seg = int(np.floor(0.9 * t))
    first = TimeSeries(ts.values[:seg].copy(), ts.repetition_hint)
    last = TimeSeries(ts.values[t - seg :].copy(), ts.repetition_hint)
    return first, last


def apply_augment(ts: TimeSeries, spec: AugmentSpec, rng: SeededRng) -> TimeSeries:
    """Dispatch one AugmentSpec against a series."""
    if spec.method == "upsample":
        return upsample(ts, spec.ratio)
    if spec.method == "downsample":
        return downsample(ts, spec.ratio)
    if spec.method == "slice":
        return random_slice(ts, spec.ratio, rng)
    return jitter(ts, spec.noise_mean, spec.noise_std, rng)


def simulate_timeseries(n_regions: int, n_timepoints: int, rng: SeededRng) -> TimeSeries:
    """Synthetic correlated BOLD-like data for demos and fixtures.

    Mixes a handful of shared latent oscillations into each region so the
    resulting connectivity has visible block structure.
    """
    n_latent = max(2, n_regions // 3)
    t = np.arange(n_timepoints)
    phases = rng.gen.uniform(0, 2 * np.pi, size=n_latent)
    freqs = rng.gen.uniform(0.02, 0.2, size=n_latent)
    latent = np.sin(2 * np.pi * freqs[None, :] * t[:, None] + phases[None, :])
    mixing = rng.gen.normal(0.0, 1.0, size=(n_latent, n_regions))
    values = latent @ mixing + 0.35 * rng.gen.standard_normal((n_timepoints, n_regions))
    return TimeSeries(values)

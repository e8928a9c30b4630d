"""Periodogram seasonality detection and classical additive decomposition."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import ConfigurationError, InsufficientDataError, ValidationError

DEFAULT_CANDIDATE_PERIODS = (6, 12)
DEFAULT_PEAK_THRESHOLD = 10.0
# Peaks whose amplitude is below this fraction of the series' magnitude are
# treated as rounding noise (e.g. after exact seasonal removal).
RELATIVE_AMPLITUDE_FLOOR = 1e-8
MIN_PERIODOGRAM_LENGTH = 8


@dataclass(frozen=True)
class Periodogram:
    """Power at Fourier frequencies k/n, k = 1..n//2 (cycles per month).

    Power is normalised so that it sums to the mean square of the detrended
    series: 2|X_k|^2 / n^2, with the Nyquist bin (even n) counted once.
    """

    frequencies: np.ndarray
    power: np.ndarray
    n: int
    scale: float

    @property
    def periods(self) -> np.ndarray:
        return 1.0 / self.frequencies

    def bin_for_period(self, period: float) -> int:
        """0-based index of the Fourier bin nearest to 1/period."""
        k = int(round(self.n / period))
        if not 1 <= k <= self.n // 2:
            raise ConfigurationError(f"period {period} is not representable with n={self.n}")
        return k - 1

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frequency", "period", "power"])
            for f, p in zip(self.frequencies, self.power):
                writer.writerow([repr(float(f)), repr(float(1.0 / f)), repr(float(p))])


def periodogram(series) -> Periodogram:
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValidationError("series must be one-dimensional")
    n = x.size
    if n < MIN_PERIODOGRAM_LENGTH:
        raise InsufficientDataError(f"periodogram needs at least {MIN_PERIODOGRAM_LENGTH} points, got {n}")
    if not np.isfinite(x).all():
        raise ValidationError("series contains non-finite values")
    detrended = signal.detrend(x, type="linear")
    spectrum = np.fft.rfft(detrended)[1 : n // 2 + 1]
    power = 2.0 * np.abs(spectrum) ** 2 / n**2
    if n % 2 == 0:
        power[-1] /= 2.0
    freqs = np.arange(1, n // 2 + 1) / n
    return Periodogram(freqs, power, n, float(np.max(np.abs(x))))


def all_periods(n: int) -> tuple:
    """Every integer period representable on an n-point Fourier grid."""
    return tuple(range(2, n // 2 + 1))


def detect_seasonality(pg: Periodogram, candidate_periods=DEFAULT_CANDIDATE_PERIODS,
                       threshold: float = DEFAULT_PEAK_THRESHOLD):
    """Return the candidate period with the strongest bin if it is a lone peak.

    A peak qualifies when its power is at least ``threshold`` times the
    median power over all bins. Returns None otherwise. Ties between
    candidates go to the shorter period.
    """
    candidates = sorted(set(int(p) for p in candidate_periods))
    if not candidates:
        raise ConfigurationError("candidate_periods is empty")
    if threshold <= 0:
        raise ConfigurationError("threshold must be positive")
    bins = [pg.bin_for_period(p) for p in candidates]
    powers = pg.power[bins]
    best = int(np.argmax(powers))
    peak = powers[best]
    floor = (RELATIVE_AMPLITUDE_FLOOR * pg.scale) ** 2
    if peak > floor and peak >= threshold * np.median(pg.power):
        return candidates[best]
    return None


@dataclass(frozen=True)
class SeasonalDecomposition:
    period: int | None
    trend: np.ndarray
    seasonal: np.ndarray
    remainder: np.ndarray
    original: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "original", "trend", "seasonal", "remainder"])
            for t, row in enumerate(zip(self.original, self.trend, self.seasonal, self.remainder)):
                writer.writerow([t, *(repr(float(v)) for v in row)])


def moving_average_trend(x: np.ndarray, period: int) -> np.ndarray:
    """Centred moving average; even windows put half weight on both ends.

    The ``period // 2`` points at each end, where the window does not fit,
    repeat the nearest valid value.
    """
    if period % 2 == 0:
        weights = np.r_[0.5, np.ones(period - 1), 0.5] / period
    else:
        weights = np.ones(period) / period
    half = period // 2
    valid = np.convolve(x, weights, mode="valid")
    trend = np.empty_like(x)
    trend[half : x.size - half] = valid
    trend[:half] = valid[0]
    trend[x.size - half :] = valid[-1]
    return trend


def decompose(series, period: int | None) -> SeasonalDecomposition:
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValidationError("series must be one-dimensional")
    if period is None:
        zeros = np.zeros_like(x)
        return SeasonalDecomposition(None, x.copy(), zeros, zeros.copy(), x.copy())
    period = int(period)
    if period < 2:
        raise ConfigurationError("period must be at least 2")
    n = x.size
    if n < 2 * period:
        raise InsufficientDataError(f"decomposition with period {period} needs {2 * period} points, got {n}")
    trend = moving_average_trend(x, period)
    half = period // 2
    t = np.arange(n)
    interior = (t >= half) & (t < n - half)
    detrended = x - trend
    pattern = np.array([detrended[interior & (t % period == i)].mean() for i in range(period)])
    pattern -= pattern.mean()
    seasonal = pattern[t % period]
    remainder = x - trend - seasonal
    return SeasonalDecomposition(period, trend, seasonal, remainder, x.copy())


def deseasonalize(series, period: int | None) -> np.ndarray:
    """Subtract the estimated seasonal component; trend and remainder are kept."""
    x = np.asarray(series, dtype=float)
    if period is None:
        return x.copy()
    return x - decompose(x, period).seasonal

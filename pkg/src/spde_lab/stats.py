"""Small Monte Carlo statistics helpers with deterministic reductions."""

from __future__ import annotations

import numpy as np


def mean_se(samples: np.ndarray) -> tuple[float, float]:
    """Sample mean and standard error (ddof=1)."""
    a = np.asarray(samples, dtype=float)
    n = a.size
    m = float(np.mean(a))
    if n < 2:
        return m, 0.0
    return m, float(np.std(a, ddof=1) / np.sqrt(n))


def log_mean_se(samples: np.ndarray) -> tuple[float, float]:
    """log of the sample mean with a delta-method standard error."""
    m, se = mean_se(samples)
    if m <= 0:
        raise ValueError("log of a non-positive mean")
    return float(np.log(m)), se / m


def combined_se(*ses: float) -> float:
    return float(np.sqrt(sum(s * s for s in ses)))


def fit_decay_rate(times: np.ndarray, values: np.ndarray) -> float:
    """Least-squares slope of log(values) against time (exponential rate)."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    ok = v > 0
    if np.count_nonzero(ok) < 2:
        raise ValueError("need at least two positive values to fit a rate")
    slope, _ = np.polyfit(t[ok], np.log(v[ok]), 1)
    return float(slope)

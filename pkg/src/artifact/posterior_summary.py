"""Posterior summaries: empirical HPD intervals, significance flags, study metrics."""

from dataclasses import dataclass

import numpy as np

from .errors import EmptySamples, LengthMismatch


@dataclass(frozen=True)
class HPDInterval:
    lower: float
    upper: float
    prob: float


@dataclass(frozen=True)
class StudyMetrics:
    """Per-field root-mean-square error and HPD coverage probability."""

    rmse: dict
    coverage: dict


def hpd(samples, prob: float = 0.95) -> HPDInterval:
    """Shortest window of ceil(prob*n) consecutive order statistics.

    Ties are broken by the smallest lower endpoint.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise EmptySamples("hpd of an empty sample")
    if not 0 < prob < 1:
        raise ValueError("prob must be in (0, 1)")
    m = int(np.ceil(prob * n))
    m = max(min(m, n), 1)
    if m == n:
        return HPDInterval(float(x[0]), float(x[-1]), prob)
    widths = x[m - 1 :] - x[: n - m + 1]
    i = int(np.argmin(widths))  # argmin takes the first minimum: smallest lower end
    return HPDInterval(float(x[i]), float(x[i + m - 1]), prob)


def significance(interval: HPDInterval) -> str:
    """positive / negative / none, by whether the HPD excludes 0."""
    if interval.lower > 0:
        return "positive"
    if interval.upper < 0:
        return "negative"
    return "none"


def summarize(samples, alpha: float = 0.05):
    """(median, HPDInterval, flag) of a sample vector at level 1-alpha."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise EmptySamples("summary of an empty sample")
    interval = hpd(x, 1 - alpha)
    return float(np.median(x)), interval, significance(interval)


def coverage_and_rmse(estimates, truths) -> StudyMetrics:
    """Study metrics across locations.

    estimates: {field: (median, lower, upper)} with aligned 1-d arrays;
    truths: {field: truth array}.  RMSE is on medians; coverage is the
    fraction of locations whose [lower, upper] contains the truth.
    """
    rmse, coverage = {}, {}
    for field, (median, lower, upper) in estimates.items():
        median = np.asarray(median, dtype=float)
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        truth = np.asarray(truths[field], dtype=float)
        if not (median.shape == lower.shape == upper.shape == truth.shape):
            raise LengthMismatch(f"field {field}: misaligned estimate/truth lengths")
        rmse[field] = float(np.sqrt(np.mean((median - truth) ** 2)))
        coverage[field] = float(np.mean((lower <= truth) & (truth <= upper)))
    return StudyMetrics(rmse=rmse, coverage=coverage)

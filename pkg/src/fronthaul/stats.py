"""Summary statistics and confidence intervals for simulation output.

Quantiles use linear interpolation between order statistics: for sorted
samples x_0..x_{m-1} and probability p, h = (m - 1) p and
q(p) = x_floor(h) + (h - floor(h)) (x_floor(h)+1 - x_floor(h)).
This is numpy's default ("linear", Hyndman-Fan type 7).

Confidence intervals on the mean use non-overlapping batch means because
queueing latencies of consecutive frames are correlated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .errors import DomainError, EmptyInputError

DEFAULT_QUANTILES = (0.5, 0.9, 0.99, 0.999, 0.9999, 0.99999)
MIN_BATCH_SAMPLES = 400
DEFAULT_BATCHES = 20


@dataclass(frozen=True)
class SummaryStats:
    count: int
    mean: float
    variance: float
    ci_half_width: float
    confidence: float
    quantiles: dict[float, float] = field(default_factory=dict)
    batches: int = 0
    small_sample: bool = False

    @property
    def degenerate(self) -> bool:
        return self.count < 2

    @property
    def stderr(self) -> float:
        """Standard error implied by the half-width (nan for degenerate input)."""
        if self.degenerate:
            return math.nan
        dof = self.batches - 1 if self.batches else None
        return self.ci_half_width / _critical(self.confidence, dof)

    @property
    def ci(self) -> tuple[float, float]:
        return self.mean - self.ci_half_width, self.mean + self.ci_half_width


def _critical(confidence: float, dof: int | None) -> float:
    tail = 0.5 + confidence / 2.0
    if dof is None:
        return float(sps.norm.ppf(tail))
    return float(sps.t.ppf(tail, dof))


def quantile(samples, p: float) -> float:
    return float(np.quantile(np.asarray(samples, dtype=float), p))


def batch_means(samples: np.ndarray, batches: int) -> np.ndarray:
    """Means of ``batches`` equal consecutive batches; leading remainder samples are dropped."""
    size = samples.size // batches
    if size == 0:
        raise DomainError(f"{samples.size} samples cannot fill {batches} batches")
    tail = samples[samples.size - size * batches:]
    return tail.reshape(batches, size).mean(axis=1)


def summarize(
    samples,
    confidence: float = 0.95,
    quantiles=DEFAULT_QUANTILES,
    batches: int = DEFAULT_BATCHES,
) -> SummaryStats:
    """Mean, unbiased variance, batch-means CI and interpolated quantiles.

    With fewer than 400 samples the CI falls back to a normal approximation
    on the raw samples and ``small_sample`` is set. A single sample yields a
    nan half-width.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise EmptyInputError("cannot summarise an empty sample set")
    if not 0.0 < confidence < 1.0:
        raise DomainError(f"confidence must lie in (0, 1), got {confidence}")
    if batches < 2:
        raise DomainError("need at least 2 batches")
    # sorting first makes mean/variance independent of input order
    ordered = np.sort(x)
    count = int(x.size)
    mean = float(math.fsum(ordered) / count)
    variance = float(np.var(ordered, ddof=1)) if count > 1 else 0.0
    qs = {float(p): float(np.quantile(ordered, p)) for p in quantiles}

    if count == 1:
        return SummaryStats(count, mean, 0.0, math.nan, confidence, qs, 0, True)
    if count < max(MIN_BATCH_SAMPLES, batches * 2):
        half = _critical(confidence, None) * math.sqrt(variance / count)
        return SummaryStats(count, mean, variance, half, confidence, qs, 0, True)
    bm = batch_means(x, batches)
    half = _critical(confidence, batches - 1) * float(np.std(bm, ddof=1)) / math.sqrt(batches)
    return SummaryStats(count, mean, variance, half, confidence, qs, batches, False)


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion, clamped to [0, 1]."""
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    if not 0 <= successes <= trials:
        raise DomainError(f"successes must lie in [0, {trials}], got {successes}")
    if not 0.0 < confidence < 1.0:
        raise DomainError(f"confidence must lie in (0, 1), got {confidence}")
    z = _critical(confidence, None)
    p = successes / trials
    z2n = z * z / trials
    centre = (p + z2n / 2.0) / (1.0 + z2n)
    half = z / (1.0 + z2n) * math.sqrt(p * (1.0 - p) / trials + z2n / (4.0 * trials))
    low = 0.0 if successes == 0 else max(0.0, centre - half)
    high = 1.0 if successes == trials else min(1.0, centre + half)
    return low, high


def quantile_interval(samples, p: float, confidence: float = 0.95) -> tuple[float, float]:
    """Distribution-free CI for the p-quantile from binomial order-statistic ranks."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    m = x.size
    if m == 0:
        raise EmptyInputError("no samples")
    alpha = 1.0 - confidence
    lo_rank = int(sps.binom.ppf(alpha / 2.0, m, p))
    hi_rank = int(sps.binom.ppf(1.0 - alpha / 2.0, m, p))
    lo_rank = min(max(lo_rank - 1, 0), m - 1)
    hi_rank = min(max(hi_rank, 0), m - 1)
    return float(x[lo_rank]), float(x[hi_rank])

"""Small statistical helpers: Wilson intervals and covariance with error bars."""

from __future__ import annotations

import math
from statistics import NormalDist


def z_score(confidence: float) -> float:
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie strictly between 0 and 1")
    return NormalDist().inv_cdf(0.5 + confidence / 2.0)


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    Behaves sensibly at the extremes (0 or n successes) where the normal
    interval collapses.
    """
    if trials <= 0:
        return 0.0, 1.0
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    z = z_score(confidence)
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials))
    return max(0.0, center - half), min(1.0, center + half)


def bernoulli_se(p: float, trials: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / trials)


def indicator_covariance(n11: int, n10: int, n01: int, n00: int) -> tuple[float, float]:
    """Covariance of two indicator variables from their joint counts.

    Returns (covariance estimate, standard error).  The standard error comes
    from the influence function of cov = p11 - p1 p0, evaluated exactly on
    the four joint cells.
    """
    n = n11 + n10 + n01 + n00
    if n <= 1:
        raise ValueError("need at least two paired observations")
    p11 = n11 / n
    p1 = (n11 + n10) / n
    p2 = (n11 + n01) / n
    cov = p11 - p1 * p2

    # influence h(f,g) = (f-p1)(g-p2) - cov, per joint cell
    var = 0.0
    for count, f, g in ((n11, 1, 1), (n10, 1, 0), (n01, 0, 1), (n00, 0, 0)):
        h = (f - p1) * (g - p2) - cov
        var += count * h * h
    var /= n * (n - 1)
    return cov, math.sqrt(var)

"""Univariate Gaussian algebra for timing variables.

All times and durations in the library are modelled as independent normal
random variables.  This module provides the closed-form pieces: sums, the
moment-matched maximum of two normals, and expected tardiness against a
deadline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .special import erf, norm_cdf, norm_pdf

__all__ = [
    "Gaussian",
    "gauss_sum",
    "clark_max",
    "clark_max_n",
    "std_normal",
    "expected_tardiness",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class Gaussian:
    """A normal distribution N(mean, variance).

    ``variance`` must be non-negative.  Infinite means are permitted only as
    sentinels for unbounded conditioning limits (see :mod:`contend.conditioning`).
    """

    mean: float
    variance: float

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError(f"variance must be >= 0, got {self.variance}")
        if math.isnan(self.mean) or math.isnan(self.variance) or math.isinf(self.variance):
            raise ValueError(f"invalid Gaussian moments ({self.mean}, {self.variance})")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)


def gauss_sum(x: Gaussian, y: Gaussian) -> Gaussian:
    """Sum of two independent Gaussians: means and variances add."""
    return Gaussian(x.mean + y.mean, x.variance + y.variance)


def std_normal(x: float) -> tuple[float, float]:
    """Standard normal density and CDF at ``x``, as ``(pdf, cdf)``."""
    return norm_pdf(x), norm_cdf(x)


def clark_max(x: Gaussian, y: Gaussian) -> Gaussian:
    """Moment-matched Gaussian approximation of max(X, Y) for independent X, Y.

    If both inputs are degenerate (zero variance) the formula's scale
    parameter vanishes, so the deterministic max of the means is returned.
    The approximated mean is never below max of the input means.
    """
    alpha2 = x.variance + y.variance
    if alpha2 <= 0.0:
        return x if x.mean >= y.mean else y
    alpha = math.sqrt(alpha2)
    beta = (x.mean - y.mean) / alpha
    pdf_b, cdf_b = std_normal(beta)
    cdf_mb = norm_cdf(-beta)
    mean = x.mean * cdf_b + y.mean * cdf_mb + alpha * pdf_b
    second = (
        (x.mean * x.mean + x.variance) * cdf_b
        + (y.mean * y.mean + y.variance) * cdf_mb
        + (x.mean + y.mean) * alpha * pdf_b
    )
    variance = second - mean * mean
    if variance < 0.0:  # roundoff when one input dominates completely
        variance = 0.0
    return Gaussian(mean, variance)


def clark_max_n(xs: list[Gaussian]) -> Gaussian:
    """Left-fold of :func:`clark_max` over a non-empty list.

    The pairing order is fixed (left to right in list order) because the
    approximation is not associative; callers get reproducible results at the
    cost of order sensitivity.
    """
    if not xs:
        raise ValueError("clark_max_n requires a non-empty list")
    acc = xs[0]
    for g in xs[1:]:
        acc = clark_max(acc, g)
    return acc


def expected_tardiness(t: Gaussian, deadline: float) -> float:
    """E[max(0, T - deadline)] for Gaussian completion time T.

    Closed form: (mu-k)/2 * (1 + erf((mu-k)/(sigma*sqrt(2))))
                 + sigma/sqrt(2*pi) * exp(-(mu-k)^2 / (2*sigma^2)).
    Degenerate T (zero variance) reduces to max(0, mu - deadline).
    """
    d = t.mean - deadline
    sigma = t.sigma
    if sigma == 0.0:
        return max(0.0, d)
    z = d / sigma
    val = 0.5 * d * (1.0 + erf(z / math.sqrt(2.0))) + sigma / _SQRT_2PI * math.exp(
        -0.5 * z * z
    )
    # Clamp tiny negative roundoff; the true value is >= max(0, d).
    return max(val, 0.0, d)

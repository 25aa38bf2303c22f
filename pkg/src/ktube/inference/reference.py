"""Reference null laws for the tube LRT: chi-square and the half-half mixture.

The chi-square cdf is the regularized lower incomplete gamma function
``P(df/2, x/2)``, evaluated with the power series below ``x < a + 1`` and
with a modified-Lentz continued fraction for the upper tail above it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

_EPS = 1e-16
_TINY = 1e-300
_MAX_TERMS = 10_000


def _gamma_series(a: float, x: float) -> float:
    term = total = 1.0 / a
    ap = a
    for _ in range(_MAX_TERMS):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a: float, x: float) -> float:
    """Upper regularized gamma ``Q(a, x)`` by continued fraction."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_TERMS):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_gamma_p(a: float, x: float) -> float:
    if a <= 0:
        raise ValueError("shape must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return 0.0
    if x < a + 1.0:
        return min(1.0, _gamma_series(a, x))
    return max(0.0, 1.0 - _gamma_cf(a, x))


def chi_square_cdf(x: float, df: int) -> float:
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if x < 0:
        raise ValueError("chi-square cdf is defined for x >= 0")
    return regularized_gamma_p(0.5 * df, 0.5 * float(x))


def chi_square_quantile(q: float, df: int) -> float:
    if not 0.0 <= q < 1.0:
        raise ValueError("quantile level must lie in [0, 1)")
    if q == 0.0:
        return 0.0
    hi = max(1.0, float(df))
    while chi_square_cdf(hi, df) < q:
        hi *= 2.0
    return brentq(lambda x: chi_square_cdf(x, df) - q, 0.0, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)


@dataclass(frozen=True)
class ReferenceDistribution:
    """``ChiSquare(df)`` or ``HalfMixture`` (point mass 1/2 at zero plus 1/2 chi-square(1))."""

    kind: str
    df: int | None = None

    def __post_init__(self):
        if self.kind == "chisquare":
            if self.df is None or int(self.df) != self.df or self.df <= 0:
                raise ValueError("ChiSquare needs a positive integer df")
        elif self.kind == "halfmixture":
            object.__setattr__(self, "df", None)
        else:
            raise ValueError(f"unknown reference distribution {self.kind!r}")

    @classmethod
    def chi_square(cls, df: int) -> "ReferenceDistribution":
        return cls("chisquare", int(df))

    @classmethod
    def half_mixture(cls) -> "ReferenceDistribution":
        return cls("halfmixture")

    def cdf(self, x: float) -> float:
        if x < 0:
            return 0.0
        if self.kind == "chisquare":
            return chi_square_cdf(x, self.df)
        return 0.5 + 0.5 * chi_square_cdf(x, 1)

    def ppf(self, q: float) -> float:
        if self.kind == "chisquare":
            return chi_square_quantile(q, self.df)
        if q <= 0.5:
            return 0.0
        return chi_square_quantile(2.0 * q - 1.0, 1)

    def __str__(self):
        return f"ChiSquare({self.df})" if self.kind == "chisquare" else "HalfMixture"


def critical_value(ref: ReferenceDistribution, alpha: float) -> float:
    """Upper ``alpha`` point of ``ref``; ``alpha`` must lie in (0, 0.5]."""
    if not 0.0 < alpha <= 0.5:
        raise ValueError(f"alpha must lie in (0, 0.5], got {alpha}")
    return ref.ppf(1.0 - alpha)


def qq_data(stats, ref: ReferenceDistribution) -> list[tuple[float, float]]:
    """(theoretical, empirical) quantile pairs at plotting positions ``(i - 0.5)/B``."""
    s = np.sort(np.asarray(stats, dtype=float).ravel())
    if s.size == 0:
        raise ValueError("no statistics to plot")
    probs = (np.arange(1, s.size + 1) - 0.5) / s.size
    return [(ref.ppf(float(p)), float(x)) for p, x in zip(probs, s)]

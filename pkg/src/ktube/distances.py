"""Distance kernels between cell-probability vectors.

All logarithms are natural.  Public functions take :class:`ProbVector` (or
plain arrays) and return floats; the underscore kernels operate on stacked
rows of flattened cells, summing over the last axis, and return ``inf``
instead of raising so that batched callers can decide what to do.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InfiniteDistanceError
from .tables import ProbVector, as_array, check_dims


def _xlogy_ratio(a, b):
    """``a*log(a/b)`` with ``0*log(0/b) = 0`` and ``a>0, b=0 -> inf``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = a * np.log(a / b)
    out = np.where(a > 0, out, 0.0)
    return np.where((a > 0) & (b <= 0), np.inf, out)


def _k2(p, m):
    return _xlogy_ratio(m, p).sum(axis=-1)


def _l2(d, p):
    return _xlogy_ratio(d, p).sum(axis=-1)


def _flat_pair(a, b):
    check_dims(a, b)
    return as_array(a).ravel(), as_array(b).ravel()


def k2(p, m) -> float:
    """Kullback tube distance ``sum m*log(m/p)``, weighted by the model element ``m``."""
    p, m = _flat_pair(p, m)
    value = float(_k2(p, m))
    if not np.isfinite(value):
        raise InfiniteDistanceError("K2 is infinite: m(t) > 0 where p(t) = 0")
    return max(value, 0.0)


def l2(d, p) -> float:
    """Likelihood distance ``sum d*log(d/p)``; ``2n*l2`` is the multinomial LRT."""
    d, p = _flat_pair(d, p)
    value = float(_l2(d, p))
    if not np.isfinite(value):
        raise InfiniteDistanceError("L2 is infinite: d(t) > 0 where p(t) = 0")
    return max(value, 0.0)


@dataclass(frozen=True)
class PearsonResiduals:
    delta: np.ndarray
    dims: tuple[int, ...]


def pearson_residuals(d, m) -> PearsonResiduals:
    check_dims(d, m)
    dims = d.dims if isinstance(d, ProbVector) else np.shape(d)
    d, m = as_array(d), as_array(m)
    if np.any(m <= 0):
        raise DomainError("Pearson residuals need m(t) > 0 on every cell")
    delta = d / m - 1.0
    delta.setflags(write=False)
    return PearsonResiduals(delta, tuple(dims))


def _tube_weight(delta, pi):
    # log((1 + pi*delta)/(1 - pi)) / (1 + delta); zero at the removable point delta = -1
    delta = np.asarray(delta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = (np.log1p(pi * delta) - np.log1p(-pi)) / (1.0 + delta)
    return np.where(delta > -1.0, w, 0.0)


def tube_weight(delta, pi):
    """Pseudo-data multiplier for the reweighted tube fit at Lagrange weight ``pi``.

    Accepts scalars or arrays for ``delta``; returns the same shape.
    """
    pi = float(pi)
    if not 0.0 <= pi < 1.0:
        raise DomainError(f"pi must lie in [0, 1), got {pi}")
    arr = np.asarray(delta, dtype=float)
    if np.any(arr < -1.0) or np.any(np.isnan(arr)):
        raise DomainError("Pearson residuals must be >= -1")
    w = np.maximum(_tube_weight(arr, pi), 0.0)
    return float(w) if w.ndim == 0 else w


def tube_path_distance(d, m, pi) -> float:
    """``pi*L2(d, p) + (1-pi)*K2(p, m)`` at ``p = pi*d + (1-pi)*m``.

    At ``pi = 0.5`` this is the mid-tube distance, which equals the
    Jensen-Shannon divergence of ``d`` and ``m``.
    """
    pi = float(pi)
    if not 0.0 <= pi <= 1.0:
        raise DomainError(f"pi must lie in [0, 1], got {pi}")
    d, m = _flat_pair(d, m)
    # pi=0 and pi=1 drop one term entirely, so 0*inf must not leak through
    p = pi * d + (1.0 - pi) * m
    value = (pi * _l2(d, p) if pi > 0 else 0.0) + ((1.0 - pi) * _k2(p, m) if pi < 1 else 0.0)
    if not np.isfinite(value):
        raise InfiniteDistanceError("tube-path distance is infinite")
    return max(float(value), 0.0)

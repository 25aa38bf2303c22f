"""Interpretability indices: the mixture index pi*, the credibility index N*, AIC/BIC."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import isotonic_regression, linprog

from ..distances import _l2
from ..models import ModelSpec, _fit, degrees_of_freedom, design_matrix
from ..sampling import POWER, draw_counts
from ..tables import ProbVector
from ..tubefit import _observed
from .reference import ReferenceDistribution, critical_value


def aic_bic(classical_lrt: float, k: int, n: float) -> tuple[float, float]:
    """AIC and BIC on the deviance scale of the classical LRT."""
    return classical_lrt + 2 * k, classical_lrt + k * math.log(n)


# ------------------------------------------------------------------ #
# pi*
# ------------------------------------------------------------------ #


@dataclass(frozen=True)
class PiStarResult:
    value: float
    m: ProbVector = field(repr=False)
    best_effort: bool = True


def _pi_star_ascent(A, logd, z, max_steps=100):
    """Successive linear programming for ``max sum exp(A z)`` subject to ``A z <= log d``.

    The objective is convex, so each linearized step lands on a vertex with
    a value no smaller than the current one; stops when the value stalls.
    """
    value = np.exp(A @ z).sum()
    for _ in range(max_steps):
        grad = A.T @ np.exp(A @ z - (A @ z).max())
        res = linprog(-grad, A_ub=A, b_ub=logd, bounds=[(None, None)] * A.shape[1], method="highs")
        if res.status != 0:
            break
        new = np.exp(A @ res.x).sum()
        if new <= value * (1 + 1e-13):
            if new > value:
                z, value = res.x, new
            break
        z, value = res.x, new
    return z, value


def pi_star(data, spec: ModelSpec, restarts: int = 20, seed: int = 0) -> PiStarResult:
    """Plug-in mixture index ``min over the family of max_t (1 - d(t)/m(t))``.

    Best effort: the problem is nonsmooth and nonconvex, so the ascent is
    restarted from random perturbations of the maximum likelihood fit and
    the best value found is returned.
    """
    d, _ = _observed(data, 1.0)
    if spec.kind == "fixed":
        m0 = spec.element
        with np.errstate(divide="ignore"):
            value = np.max(np.where(m0 > 0, 1.0 - d / m0, -np.inf))
        return PiStarResult(float(min(max(value, 0.0), 1.0)), ProbVector(m0, spec.dims))
    dv = d.ravel()
    X = design_matrix(spec)
    A = np.hstack([X, np.ones((X.shape[0], 1))])
    # empty cells force m(t) -> 0; a deep floor keeps the program bounded and feasible
    floor = np.log(dv[dv > 0].min()) - 30.0
    logd = np.where(dv > 0, np.log(np.where(dv > 0, dv, 1.0)), floor)
    m_mle = _fit(spec, d[None])[0][0].ravel()
    z_mle = np.linalg.lstsq(A, np.log(np.maximum(m_mle, 1e-300)), rcond=None)[0]
    rng = np.random.default_rng(seed)
    best_z, best = None, -np.inf
    for r in range(restarts):
        z = z_mle.copy()
        if r:
            z[:-1] += rng.normal(scale=0.5, size=z.size - 1)
        z[-1] += np.min(logd - A @ z)
        z, value = _pi_star_ascent(A, logd, z)
        if value > best:
            best_z, best = z, value
    eta = A @ best_z
    m = np.exp(eta - eta.max())
    return PiStarResult(float(min(max(1.0 - best, 0.0), 1.0)), ProbVector(m.reshape(spec.dims), spec.dims))


# ------------------------------------------------------------------ #
# N*
# ------------------------------------------------------------------ #


@dataclass(frozen=True)
class NStarResult:
    """Sample size at which the classical LRT reaches the target power.

    ``value`` is ``None`` when the power at ``n_cap`` is still below target.
    """

    value: int | None
    n_cap: int
    probes: list[tuple[int, float, float]] = field(default_factory=list)

    @property
    def exceeds_cap(self) -> bool:
        return self.value is None

    def __str__(self):
        return f"> {self.n_cap}" if self.value is None else str(self.value)


def classical_power(data, spec: ModelSpec, N: int, reps: int, seed: int, alpha: float = 0.05, chunk_size: int = 500):
    """Monte Carlo power of the size-``alpha`` classical LRT against samples of size N from ``d``."""
    d, _ = _observed(data, 1.0)
    df = degrees_of_freedom(spec)
    crit = critical_value(ReferenceDistribution.chi_square(df), alpha)
    rejections = 0
    for s in range(0, reps, chunk_size):
        reps_chunk = range(s, min(s + chunk_size, reps))
        counts = draw_counts(d, N, seed, reps_chunk, POWER, N)
        ds = counts.reshape((len(reps_chunk),) + d.shape) / N
        m = _fit(spec, ds)[0]
        lrt = 2.0 * N * _l2(ds.reshape(len(reps_chunk), -1), m.reshape(len(reps_chunk), -1))
        rejections += int(np.count_nonzero(lrt > crit))
    return rejections / reps


def n_star(
    data,
    spec: ModelSpec,
    alpha: float = 0.05,
    target_power: float = 0.5,
    reps: int = 1000,
    seed: int | None = None,
    n_cap: int | None = None,
    n_min: int = 5,
) -> NStarResult:
    """Credibility index: the sample size giving ``target_power`` in the classical LRT.

    Power is estimated by simulation from the observed proportions at sizes
    chosen by bisection on ``log N``; the probed powers are smoothed by
    isotonic regression before the crossing is interpolated.
    """
    if seed is None:
        raise ValueError("N* requires an explicit seed")
    if reps < 200:
        raise ValueError("reps must be at least 200")
    d, n = _observed(data, n_cap)
    n_cap = int(round(n))
    if degrees_of_freedom(spec) <= 0:
        raise ValueError("N* is undefined for a saturated model")
    probes: dict[int, float] = {}

    def power(N):
        if N not in probes:
            probes[N] = classical_power(data, spec, N, reps, seed, alpha)
        return probes[N]

    lo, hi = n_min, int(n_cap)
    if power(lo) < target_power and power(hi) >= target_power:
        while hi - lo > 1:
            mid = int(round(math.sqrt(lo * hi)))
            mid = min(max(mid, lo + 1), hi - 1)
            if power(mid) >= target_power:
                hi = mid
            else:
                lo = mid
    Ns = np.array(sorted(probes))
    raw = np.array([probes[N] for N in Ns])
    smooth = isotonic_regression(raw).x if raw.size > 1 else raw
    table = [(int(N), float(r), float(s)) for N, r, s in zip(Ns, raw, smooth)]
    above = np.flatnonzero(smooth >= target_power)
    if above.size == 0:
        return NStarResult(None, int(n_cap), table)
    j = above[0]
    if j == 0:
        return NStarResult(int(Ns[0]), int(n_cap), table)
    x0, x1 = math.log(Ns[j - 1]), math.log(Ns[j])
    y0, y1 = smooth[j - 1], smooth[j]
    x = x1 if y1 == y0 else x0 + (target_power - y0) * (x1 - x0) / (y1 - y0)
    return NStarResult(int(round(math.exp(x))), int(n_cap), table)

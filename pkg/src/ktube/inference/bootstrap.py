"""Semiparametric bootstrap of the tube LRT.

Replicate tables are drawn from the null estimator ``p_c`` (the data
blended with the fitted model element at radius ``c``), and each replicate
is refitted at the same radius.  Replicates run in fixed-size chunks that
can be dispatched to a thread pool; every replicate has its own random
stream and solver state, so results do not depend on chunking or on the
number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConvergenceError
from ..models import ModelSpec, degrees_of_freedom
from ..sampling import BOOTSTRAP, draw_counts
from ..tubefit import _invert_rows, _observed, invert_for_c, rho_star
from .reference import ReferenceDistribution, critical_value

MAX_FAILURE_RATE = 0.01


@dataclass(frozen=True)
class BootstrapResult:
    c: float
    B: int
    stats: np.ndarray = field(repr=False)
    critical_value: float
    zero_fraction: float
    seed: int
    alpha: float = 0.05
    failures: int = 0

    @property
    def sqrt_c(self) -> float:
        return math.sqrt(self.c)


def _empirical_critical(stats, alpha):
    s = np.sort(stats)
    return float(s[math.ceil((1.0 - alpha) * s.size) - 1])


def _tube_stats(d_b, spec, c, n):
    out = _invert_rows(d_b, spec, c, n)
    return np.where(out["interior"], 0.0, np.maximum(out["lrt"], 0.0)), out["converged"]


def _run_chunks(job, B, chunk_size, workers):
    chunks = [range(s, min(s + chunk_size, B)) for s in range(0, B, chunk_size)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, chunks))
    else:
        parts = [job(ch) for ch in chunks]
    return tuple(np.concatenate(x) for x in zip(*parts))


def bootstrap_null(
    data,
    spec: ModelSpec,
    c: float,
    B: int = 10_000,
    alpha: float = 0.05,
    seed: int | None = None,
    n=None,
    workers: int = 1,
    chunk_size: int = 1000,
) -> BootstrapResult:
    """Bootstrap null distribution of the tube LRT at radius ``c``."""
    if seed is None:
        raise ValueError("bootstrap requires an explicit seed")
    if B < 100:
        raise ValueError("B must be at least 100")
    if c < 0:
        raise ValueError("tube radius must be nonnegative")
    d, n = _observed(data, n)
    n_draw = int(round(n))
    p_c = invert_for_c(d, spec, c, n=n).p_hat.probs

    def job(reps):
        counts = draw_counts(p_c, n_draw, seed, reps, BOOTSTRAP)
        d_b = counts.reshape((len(reps),) + d.shape) / n_draw
        return _tube_stats(d_b, spec, c, float(n_draw))

    stats, converged = _run_chunks(job, B, chunk_size, workers)
    failures = int(np.count_nonzero(~converged))
    if failures > MAX_FAILURE_RATE * B:
        raise ConvergenceError(f"{failures} of {B} bootstrap replicates failed to converge")
    stats.setflags(write=False)
    return BootstrapResult(
        c=float(c),
        B=int(B),
        stats=stats,
        critical_value=_empirical_critical(stats, alpha),
        zero_fraction=float(np.mean(stats == 0.0)),
        seed=int(seed),
        alpha=float(alpha),
        failures=failures,
    )


@dataclass(frozen=True)
class RadiusScanRow:
    c: float
    lrt: float
    simulated_critical: float
    asymptotic_critical: float
    zero_fraction: float

    @property
    def sqrt_c(self) -> float:
        return math.sqrt(self.c)


@dataclass(frozen=True)
class BootstrapLimit:
    limit: float
    asymptotic_limit: float | None
    rows: list[RadiusScanRow]
    results: list[BootstrapResult] = field(repr=False, default_factory=list)

    @property
    def sqrt_limit(self) -> float:
        return math.sqrt(self.limit)


def default_radius_grid(rho: float, step: float = 0.01) -> list[float]:
    """Radii evenly spaced in ``sqrt(c)`` from 0 up to ``rho``."""
    top = math.sqrt(max(rho, 0.0))
    k = int(math.floor(top / step + 1e-9))
    grid = [(i * step) ** 2 for i in range(k + 1)]
    if grid[-1] < rho:
        grid.append(rho)
    return grid


def bootstrap_lower_limit(
    data,
    spec: ModelSpec,
    B: int = 10_000,
    alpha: float = 0.05,
    seed: int | None = None,
    c_grid=None,
    n=None,
    workers: int = 1,
    full_scan: bool = False,
    asymptotic_limit: float | None = None,
) -> BootstrapLimit:
    """Smallest radius at which the observed tube LRT stops exceeding its bootstrap critical value.

    The grid is scanned upward and the crossing refined by linear
    interpolation between the last rejecting and the first accepting radius.
    With ``full_scan`` every grid radius is evaluated (for plotting).
    """
    d, n = _observed(data, n)
    if c_grid is None:
        c_grid = default_radius_grid(rho_star(d, spec))
    grid = sorted(float(c) for c in c_grid)
    df = degrees_of_freedom(spec)
    rows, results = [], []
    limit = None
    prev = None
    for c in grid:
        obs = invert_for_c(d, spec, c, n=n).lrt
        res = bootstrap_null(d, spec, c, B=B, alpha=alpha, seed=seed, n=n, workers=workers)
        asym_ref = ReferenceDistribution.chi_square(df) if c == 0 and df > 0 else ReferenceDistribution.half_mixture()
        rows.append(RadiusScanRow(c, obs, res.critical_value, critical_value(asym_ref, alpha), res.zero_fraction))
        results.append(res)
        diff = obs - res.critical_value
        if limit is None and diff <= 0:
            if prev is None:
                limit = c
            else:
                c0, f0 = prev
                limit = c0 + (c - c0) * f0 / (f0 - diff)
            if not full_scan:
                break
        prev = (c, diff)
    if limit is None:
        limit = grid[-1]
    return BootstrapLimit(float(limit), asymptotic_limit, rows, results)

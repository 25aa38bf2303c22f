"""Reproducible multinomial draws on counter-based random streams.

Every replicate owns a Philox stream keyed by ``(seed, purpose, *key)``, so
the counts drawn for replicate ``b`` never depend on how many replicates
run, in what order, or in which worker.
"""

from __future__ import annotations

import numpy as np

BOOTSTRAP = 1
POWER = 2


def replicate_stream(seed: int, *key: int) -> np.random.Generator:
    if seed is None:
        raise ValueError("an explicit seed is required")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def multinomial_inverse_cdf(p, n: int, rng: np.random.Generator) -> np.ndarray:
    """Cell counts of ``n`` draws from ``p`` by inverting the cumulative distribution."""
    p = np.asarray(p, dtype=float).ravel()
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    u = rng.random(int(n))
    cells = np.minimum(np.searchsorted(cdf, u, side="right"), p.size - 1)
    return np.bincount(cells, minlength=p.size).astype(float)


def draw_counts(p, n: int, seed: int, replicates, *key: int) -> np.ndarray:
    """Counts for each replicate index in ``replicates``; shape ``(len, cells)``."""
    return np.stack([multinomial_inverse_cdf(p, n, replicate_stream(seed, *key, b)) for b in replicates])

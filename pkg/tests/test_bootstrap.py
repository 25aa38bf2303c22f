import math

import numpy as np
import pytest

from ktube import ModelSpec
from ktube.distances import k2
from ktube.inference.bootstrap import bootstrap_lower_limit, bootstrap_null, default_radius_grid
from ktube.inference.reference import ReferenceDistribution
from ktube.sampling import BOOTSTRAP, draw_counts
from ktube.tubefit import invert_for_c, lower_confidence_limit, rho_star

from conftest import independence


def two_cell_stats(x, m0, c, n):
    """Tube LRT for the one-element family {m0} on 2 cells, by vectorized bisection."""
    x = np.asarray(x, dtype=float)

    def p_of(t):
        return t[:, None] * x + (1 - t[:, None]) * m0

    with np.errstate(divide="ignore"):
        full = np.sum(m0 * np.log(m0 / x), axis=1)
    lo, hi = np.zeros(len(x)), np.ones(len(x))
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        r = np.sum(m0 * np.log(m0 / p_of(mid)), axis=1)
        lo, hi = np.where(r < c, mid, lo), np.where(r < c, hi, mid)
    p = p_of(0.5 * (lo + hi))
    with np.errstate(divide="ignore", invalid="ignore"):
        l2 = np.sum(np.where(x > 0, x * np.log(x / p), 0.0), axis=1)
    return np.where(full <= c, 0.0, 2 * n * l2)


class TestBootstrapNull:
    def test_seed_required(self, eye_hair):
        with pytest.raises(ValueError):
            bootstrap_null(eye_hair, independence(eye_hair), 0.05, B=200)

    def test_argument_checks(self, eye_hair):
        spec = independence(eye_hair)
        with pytest.raises(ValueError):
            bootstrap_null(eye_hair, spec, 0.05, B=99, seed=1)
        with pytest.raises(ValueError):
            bootstrap_null(eye_hair, spec, -0.05, B=200, seed=1)

    def test_result_invariants(self, eye_hair):
        res = bootstrap_null(eye_hair, independence(eye_hair), 0.09, B=300, seed=4)
        assert res.stats.shape == (300,)
        assert np.all(res.stats >= 0)
        assert res.critical_value == np.sort(res.stats)[math.ceil(0.95 * 300) - 1]
        assert 0 <= res.zero_fraction <= 1
        assert res.failures == 0

    def test_classical_radius_matches_chi_square(self, eye_hair):
        res = bootstrap_null(eye_hair, independence(eye_hair), 0.0, B=10_000, seed=21)
        assert abs(res.stats.mean() - 9) < 0.05 * 9
        ref = ReferenceDistribution.chi_square(9)
        s = np.sort(res.stats)
        probs = (np.arange(1, s.size + 1) - 0.5) / s.size
        # multinomial discreteness adds a little on top of the KS band
        assert np.max(np.abs([ref.cdf(x) for x in s[::10]] - probs[::10])) < 0.03

    def test_two_cell_boundary_zero_fraction(self):
        m0 = np.array([0.5, 0.5])
        d = np.array([0.6, 0.4])
        spec = ModelSpec.fixed(m0)
        res = bootstrap_null(d, spec, k2(d, m0), B=2000, seed=17, n=100_000)
        assert 0.45 <= res.zero_fraction <= 0.55

    def test_two_cell_stats_oracle(self):
        m0 = np.array([0.5, 0.5])
        d = np.array([0.62, 0.38])
        c = 0.01
        res = bootstrap_null(d, ModelSpec.fixed(m0), c, B=200, seed=9, n=200)
        # same replicate tables, statistics recomputed independently
        p_c = invert_for_c(d, ModelSpec.fixed(m0), c, n=200).p_hat.flat
        x = draw_counts(p_c, 200, 9, range(200), BOOTSTRAP) / 200
        np.testing.assert_allclose(res.stats, two_cell_stats(x, m0, c, 200), atol=1e-6)

    def test_bit_identical_across_parallelism(self, eye_hair):
        spec = independence(eye_hair)
        runs = [
            bootstrap_null(eye_hair, spec, 0.09, B=400, seed=3, workers=w, chunk_size=cs)
            for w, cs in ((1, 1000), (1, 37), (3, 100), (4, 64))
        ]
        for r in runs[1:]:
            np.testing.assert_array_equal(r.stats, runs[0].stats)
            assert r.critical_value == runs[0].critical_value


class TestLowerLimit:
    def test_radius_grid(self):
        grid = default_radius_grid(0.0905)
        assert grid[0] == 0.0 and grid[-1] == 0.0905
        np.testing.assert_allclose(np.sqrt(grid[:-1]), np.arange(len(grid) - 1) * 0.01, atol=1e-15)

    def test_accepting_model(self, recruits, recruit_specs):
        lim = bootstrap_lower_limit(recruits, recruit_specs[3], B=200, seed=2)
        assert lim.limit == 0.0

    def test_limits_below_rho_star(self, eye_hair):
        spec = independence(eye_hair)
        lim = bootstrap_lower_limit(eye_hair, spec, B=300, seed=5)
        rho = rho_star(eye_hair, spec)
        assert lim.limit <= rho
        assert lower_confidence_limit(eye_hair, spec, 2.705543454095404) <= rho

    def test_scalar_scan_oracle(self):
        m0 = np.array([0.5, 0.5])
        d = np.array([0.62, 0.38])
        n, B, seed = 200, 400, 13
        rho = k2(d, m0)
        step = 1e-4
        grid = np.arange(0, rho, step)
        lim = bootstrap_lower_limit(d, ModelSpec.fixed(m0), B=B, seed=seed, c_grid=grid, n=n)
        # exhaustive scan computed independently of the tube solver
        first = None
        for c in grid:
            lo, hi = 0.0, 1.0
            for _ in range(80):
                t = 0.5 * (lo + hi)
                if np.sum(m0 * np.log(m0 / (t * d + (1 - t) * m0))) < c:
                    lo = t
                else:
                    hi = t
            p_c = 0.5 * (lo + hi) * d + (1 - 0.5 * (lo + hi)) * m0
            obs = two_cell_stats(d[None], m0, c, n)[0]
            x = draw_counts(p_c, n, seed, range(B), BOOTSTRAP) / n
            crit = np.sort(two_cell_stats(x, m0, c, n))[math.ceil(0.95 * B) - 1]
            if obs <= crit:
                first = c
                break
        assert first is not None
        assert first - step <= lim.limit <= first + 1e-12

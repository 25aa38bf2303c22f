import numpy as np
import pytest

from ktube.sampling import BOOTSTRAP, POWER, draw_counts, multinomial_inverse_cdf, replicate_stream


class TestStreams:
    def test_seed_required(self):
        with pytest.raises(ValueError):
            replicate_stream(None, 1, 0)

    def test_same_key_same_stream(self):
        a = replicate_stream(7, BOOTSTRAP, 3).random(5)
        b = replicate_stream(7, BOOTSTRAP, 3).random(5)
        np.testing.assert_array_equal(a, b)

    def test_keys_separate_streams(self):
        base = replicate_stream(7, BOOTSTRAP, 3).random(5)
        for other in ((8, BOOTSTRAP, 3), (7, POWER, 3), (7, BOOTSTRAP, 4)):
            assert not np.array_equal(base, replicate_stream(*other).random(5))


class TestMultinomial:
    def test_totals_and_empty_cells(self):
        rng = replicate_stream(1, 0)
        counts = multinomial_inverse_cdf([0.2, 0.0, 0.5, 0.3], 1000, rng)
        assert counts.sum() == 1000
        assert counts[1] == 0

    def test_cell_means(self):
        p = np.array([0.1, 0.2, 0.3, 0.4])
        counts = draw_counts(p, 200, 5, range(4000), BOOTSTRAP)
        se = np.sqrt(200 * p * (1 - p) / 4000)
        assert np.all(np.abs(counts.mean(axis=0) - 200 * p) < 4 * se)
        # cell covariance of a multinomial
        cov = np.cov(counts.T)
        expected = 200 * (np.diag(p) - np.outer(p, p))
        np.testing.assert_allclose(cov, expected, atol=2.0)

    def test_replicates_independent_of_batch(self):
        p = [0.25, 0.25, 0.5]
        full = draw_counts(p, 50, 11, range(10), BOOTSTRAP)
        part = draw_counts(p, 50, 11, [7, 3], BOOTSTRAP)
        np.testing.assert_array_equal(part, full[[7, 3]])

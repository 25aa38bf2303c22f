
import numpy as np
import pytest

from ktube import ModelSpec, fit_weighted, parse_model, to_proportions
from ktube.distances import l2
from ktube.errors import DimensionMismatchError, ModelSpecError
from ktube.models import _fit, degrees_of_freedom, design_matrix, model_dimension



def weighted_loglik(w, m):
    return float(np.sum(np.where(w > 0, w * np.log(np.where(m > 0, m, 1.0)), 0.0)))


class TestDimensions:
    def test_independence(self):
        spec = ModelSpec.independence((4, 4))
        assert model_dimension(spec) == 6
        assert degrees_of_freedom(spec) == 9
        assert degrees_of_freedom(ModelSpec.independence((5, 4))) == 12

    def test_recruit_models(self, recruit_specs):
        assert [model_dimension(s) for s in recruit_specs] == [4, 10, 11, 12, 13, 14]
        assert [degrees_of_freedom(s) for s in recruit_specs] == [11, 5, 4, 3, 2, 1]

    def test_saturated(self, recruits):
        spec = parse_model("saturated", recruits.axis_names, recruits.axis_sizes)
        assert degrees_of_freedom(spec) == 0

    def test_design_matrix_rank(self, recruit_specs):
        for spec in recruit_specs:
            X = design_matrix(spec)
            assert X.shape == (16, model_dimension(spec))
            assert np.linalg.matrix_rank(np.hstack([X, np.ones((16, 1))])) == model_dimension(spec) + 1


class TestSpec:
    def test_closure_drops_redundant_generators(self):
        spec = ModelSpec.loglinear((2, 2, 2), [(0, 1), (0,), (0, 1, 2), (1, 2)])
        assert spec.generators == ((0, 1, 2),)
        assert len(spec.terms) == 7

    def test_closure_terms(self):
        spec = ModelSpec.loglinear((2, 2, 2, 2), [(0, 1, 2), (0, 3)])
        assert set(spec.terms) == {(0,), (1,), (2,), (3,), (0, 1), (0, 2), (1, 2), (0, 3), (0, 1, 2)}

    def test_independence_needs_two_axes(self):
        with pytest.raises(ModelSpecError):
            ModelSpec.independence((2, 2, 2))

    @pytest.mark.parametrize("gens", [[()], [(0, 0)], [(3,)], []])
    def test_bad_generators(self, gens):
        with pytest.raises(ModelSpecError):
            ModelSpec.loglinear((2, 2, 2), gens)


class TestParseModel:
    names = ("Color", "Region", "Location", "Preference")
    dims = (2, 2, 2, 2)

    def test_initials_and_names_agree(self):
        a = parse_model("loglinear:CRL,CP,RLP", self.names, self.dims)
        b = parse_model("loglinear:Color*Region*Location, color:preference, Region+Location+Preference", self.names, self.dims)
        assert a.generators == b.generators

    def test_single_axis_by_name(self):
        spec = parse_model("loglinear:Color,Region,Location,Preference", self.names, self.dims)
        assert model_dimension(spec) == 4

    @pytest.mark.parametrize("text", ["bogus", "loglinear:", "loglinear:XY", "loglinear:Color*Size"])
    def test_errors(self, text):
        with pytest.raises(ModelSpecError):
            parse_model(text, self.names, self.dims)

    def test_ambiguous_initials(self):
        with pytest.raises(ModelSpecError):
            parse_model("loglinear:AB", ("Age", "Area"), (2, 2))


class TestFitWeighted:
    def test_product_table_is_fixed_point(self):
        w = np.outer([1, 2, 3], [4, 1])
        fit = fit_weighted(ModelSpec.independence((3, 2)), w)
        np.testing.assert_allclose(fit.m.probs, w / w.sum(), rtol=1e-14)
        assert fit.iterations == 1
        w3 = np.einsum("i,j,k->ijk", [1, 2], [3, 1, 1], [2, 5])
        fit = fit_weighted(ModelSpec.loglinear((2, 3, 2), [(0,), (1,), (2,)]), w3)
        np.testing.assert_allclose(fit.m.probs, w3 / w3.sum(), rtol=1e-12)
        assert fit.iterations <= 2

    def test_table1_independence(self, eye_hair):
        fit = fit_weighted(ModelSpec.independence(eye_hair.axis_sizes), eye_hair.counts)
        rows, cols = eye_hair.counts.sum(1), eye_hair.counts.sum(0)
        np.testing.assert_allclose(fit.m.probs, np.outer(rows, cols) / 592**2, rtol=1e-14)
        assert abs(2 * 592 * l2(to_proportions(eye_hair), fit.m) - 146.44) < 0.01

    def test_recruits_model2(self, recruits, recruit_specs):
        fit = fit_weighted(recruit_specs[1], recruits.counts)
        assert fit.converged
        assert abs(2 * recruits.n * l2(to_proportions(recruits), fit.m) - 78.02) < 0.01

    def test_margins_match(self, recruits, recruit_specs):
        w = recruits.counts / recruits.n
        for spec in recruit_specs:
            m = fit_weighted(spec, recruits.counts).m.probs
            for g in spec.generators:
                drop = tuple(a for a in range(4) if a not in g)
                np.testing.assert_allclose(m.sum(axis=drop), w.sum(axis=drop), atol=1e-8)

    def test_scale_invariance(self, recruits, recruit_specs):
        spec = recruit_specs[2]
        a = fit_weighted(spec, recruits.counts).m.probs
        b = fit_weighted(spec, 0.37 * recruits.counts).m.probs
        np.testing.assert_allclose(a, b, rtol=1e-9)

    def test_saturated_reproduces_weights(self, recruits):
        spec = parse_model("saturated", recruits.axis_names, recruits.axis_sizes)
        np.testing.assert_allclose(fit_weighted(spec, recruits.counts).m.probs, recruits.counts / recruits.n, rtol=1e-12)

    @pytest.mark.parametrize("shape", [(2, 2), (2, 3)])
    def test_grid_search_oracle(self, shape):
        rng = np.random.default_rng(sum(shape))
        w = rng.uniform(0.5, 3.0, size=shape)
        fit = fit_weighted(ModelSpec.independence(shape), w).m.probs
        # dense grid over the row and column simplices
        step = 0.002 if shape == (2, 2) else 0.01
        grid = np.arange(step, 1.0, step)
        if shape == (2, 2):
            cols = np.stack([grid, 1 - grid], axis=1)
        else:
            a, b = np.meshgrid(grid, grid, indexing="ij")
            keep = a + b < 1 - 1e-12
            cols = np.stack([a[keep], b[keep], 1 - a[keep] - b[keep]], axis=1)
        rows = np.stack([grid, 1 - grid], axis=1)
        # every (row, column) pair of margins on the grid
        m = rows[:, None, :, None] * cols[None, :, None, :]
        values = np.sum(w * np.log(m), axis=(2, 3))
        i, j = np.unravel_index(np.argmax(values), values.shape)
        best, arg = values[i, j], m[i, j]
        np.testing.assert_allclose(fit, arg, atol=2 * step)
        assert weighted_loglik(w, fit) >= best - 1e-12

    def test_zero_margin_cells_get_zero(self):
        w = np.array([[[3.0, 1.0], [0.0, 0.0]], [[2.0, 2.0], [1.0, 4.0]]])
        fit = fit_weighted(ModelSpec.loglinear((2, 2, 2), [(0, 1), (2,)]), w)
        np.testing.assert_array_equal(fit.m.probs[0, 1], 0.0)
        assert np.all(fit.m.probs[w.sum(axis=2, keepdims=True).repeat(2, 2) > 0] > 0)

    def test_bad_weights(self):
        spec = ModelSpec.independence((2, 2))
        with pytest.raises(ValueError):
            fit_weighted(spec, [[1, -1], [1, 1]])
        with pytest.raises(DimensionMismatchError):
            fit_weighted(spec, [1, 2, 3])

    def test_batch_rows_independent(self, recruits, recruit_specs):
        rng = np.random.default_rng(11)
        w = rng.uniform(0.1, 1.0, size=(6, 2, 2, 2, 2))
        for spec in recruit_specs[1:3]:
            together = _fit(spec, w)[0]
            for i in range(6):
                alone = _fit(spec, w[i : i + 1])[0][0]
                np.testing.assert_array_equal(together[i], alone)

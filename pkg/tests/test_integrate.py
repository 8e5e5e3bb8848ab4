import numpy as np
import pytest

from conftest import as_view, clique_edges, graph, random_connected_graph
from exceptions import DimensionMismatch, InvalidParameter
from integrate import (QuadraticSurrogate, SglaParams, baseline_weights, evaluate_surrogate,
                       fit_surrogate, run_sgla, run_sgla_plus, sample_weight_vectors, with_overrides)
from objective import simplex_grid


def planted(theta):
    surrogate = QuadraticSurrogate(np.asarray(theta, dtype=float))
    return lambda w: evaluate_surrogate(surrogate, w)


def residual(samples, values, surrogate):
    fitted = np.array([evaluate_surrogate(surrogate, w) for w in samples])
    return float(np.sum((fitted - np.asarray(values)) ** 2))


@pytest.fixture
def twin_views(rng):
    view = as_view(random_connected_graph(rng, 30, 0.15))
    return [view, view]


class TestSglaParams:
    def test_rejects_zero_iterations(self):
        with pytest.raises(InvalidParameter):
            SglaParams(t_max=0)

    def test_rejects_non_positive_epsilon(self):
        with pytest.raises(InvalidParameter):
            SglaParams(epsilon=0.0)

    def test_overrides_skip_none(self):
        params = with_overrides(SglaParams(gamma=0.3), gamma=None, t_max=7)
        assert params.t_max == 7
        assert params.gamma == 0.3


class TestSampleWeightVectors:
    def test_two_views(self):
        samples = sample_weight_vectors(2)
        np.testing.assert_allclose(samples, [[0.5, 0.5], [0.75, 0.25], [0.25, 0.75]])

    def test_three_views(self):
        samples = sample_weight_vectors(3)
        assert len(samples) == 4
        np.testing.assert_allclose(samples[0], 1 / 3)
        np.testing.assert_allclose(samples[2], [1 / 6, 2 / 3, 1 / 6])

    def test_samples_lie_on_the_simplex(self):
        for r in range(1, 9):
            for w in sample_weight_vectors(r):
                assert w.min() >= 0
                assert w.sum() == pytest.approx(1.0, abs=1e-15)

    def test_rejects_zero_views(self):
        with pytest.raises(InvalidParameter):
            sample_weight_vectors(0)


class TestSurrogate:
    def test_evaluate(self):
        s = QuadraticSurrogate(np.array([[1.0, 2.0], [0.0, 3.0]]))
        assert evaluate_surrogate(s, [0.5, 0.5]) == pytest.approx(4.25)

    def test_evaluate_wrong_length(self):
        with pytest.raises(DimensionMismatch):
            evaluate_surrogate(QuadraticSurrogate(np.eye(2)), [0.2, 0.3, 0.5])

    def test_recovers_planted_quadratic_on_two_views(self):
        theta = [[2.0, -1.0], [0.0, 0.5]]
        f = planted(theta)
        samples = [np.array([w1, 1.0 - w1]) for w1 in np.linspace(0, 1, 6)]
        fitted = fit_surrogate(samples, [f(w) for w in samples], 1e-12)
        np.testing.assert_allclose(fitted.theta, theta, atol=1e-6)

    def test_recovers_planted_quadratic_on_three_views(self):
        theta = np.triu([[1.5, -0.5, 0.25], [0.0, 2.0, -1.0], [0.0, 0.0, 0.75]])
        f = planted(theta)
        samples = simplex_grid(3, 0.25)
        fitted = fit_surrogate(samples, [f(w) for w in samples], 1e-12)
        np.testing.assert_allclose(fitted.theta, theta, atol=1e-6)
        assert np.all(np.tril(fitted.theta, -1) == 0)

    def test_ridge_shrinks_coefficients_and_grows_residual(self):
        samples = sample_weight_vectors(3)
        values = [0.8, 0.1, 0.5, -0.2]
        fits = [fit_surrogate(samples, values, alpha) for alpha in (1e-6, 1e-2, 1.0, 100.0)]
        norms = [np.linalg.norm(s.theta) for s in fits]
        residuals = [residual(samples, values, s) for s in fits]
        assert all(a >= b - 1e-9 for a, b in zip(norms, norms[1:]))
        assert all(a <= b + 1e-9 for a, b in zip(residuals, residuals[1:]))

    def test_mismatched_values(self):
        with pytest.raises(InvalidParameter):
            fit_surrogate(sample_weight_vectors(2), [1.0, 2.0], 0.05)


class TestRunSgla:
    def test_single_view(self, k4):
        view = as_view(k4)
        result = run_sgla([view], 2)
        np.testing.assert_array_equal(result.weights, [1.0])
        assert result.evaluations == 1 and result.converged
        np.testing.assert_allclose(result.laplacian.toarray(), view.matrix.toarray())

    def test_identical_views_settle_at_uniform(self, twin_views):
        result = run_sgla(twin_views, 3, SglaParams(gamma=0.5))
        np.testing.assert_allclose(result.weights, [0.5, 0.5], atol=1e-3)
        assert result.weights.sum() == pytest.approx(1.0, abs=1e-15)
        assert result.converged

    def test_evaluation_cap(self, rng):
        views = [as_view(random_connected_graph(rng, 30, 0.15)) for _ in range(3)]
        result = run_sgla(views, 3, SglaParams(t_max=5))
        assert result.evaluations <= 6
        assert len(result.trace) == result.evaluations
        assert [record.iteration for record in result.trace] == list(range(1, result.evaluations + 1))

    def test_restarted_optimizer(self, twin_views):
        result = run_sgla(twin_views, 3, SglaParams(restart_optimizer=True))
        np.testing.assert_allclose(result.weights, [0.5, 0.5], atol=1e-3)
        assert result.converged

    def test_no_views(self):
        with pytest.raises(DimensionMismatch):
            run_sgla([], 2)

    def test_mismatched_views(self, k4, triangles):
        with pytest.raises(DimensionMismatch):
            run_sgla([as_view(k4), as_view(triangles)], 2)


class TestRunSglaPlus:
    """Surrogate search that spends r+1 objective evaluations."""

    def test_spends_r_plus_one_evaluations(self, rng):
        for r in range(2, 9):
            views = [as_view(random_connected_graph(rng, 24, 0.2), i) for i in range(r)]
            result = run_sgla_plus(views, 3)
            assert result.evaluations == r + 1
            assert len(result.trace) == r + 1
            assert result.weights.min() >= 0
            assert result.weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_single_view(self, k4):
        result = run_sgla_plus([as_view(k4)], 2)
        assert result.evaluations == 1
        np.testing.assert_array_equal(result.weights, [1.0])

    def test_identical_views_settle_at_uniform(self, twin_views):
        result = run_sgla_plus(twin_views, 3, SglaParams(alpha_r=1e-10))
        np.testing.assert_allclose(result.weights, [0.5, 0.5], atol=1e-3)
        assert result.surrogate is not None

    def test_safeguard_spends_one_more_evaluation(self, rng):
        views = [as_view(random_connected_graph(rng, 24, 0.2), i) for i in range(3)]
        plain = run_sgla_plus(views, 3)
        guarded = run_sgla_plus(views, 3, SglaParams(safeguard=True))
        assert guarded.evaluations == plain.evaluations + 1
        best = min(record.h for record in guarded.trace)
        chosen = [record.h for record in guarded.trace
                  if np.array_equal(record.weights, guarded.weights)]
        assert chosen and min(chosen) == best

    def test_parallel_samples_match_serial(self, rng):
        views = [as_view(random_connected_graph(rng, 40, 0.15), i) for i in range(4)]
        serial = run_sgla_plus(views, 3)
        parallel = run_sgla_plus(views, 3, SglaParams(workers=4))
        assert parallel.evaluations == 5
        np.testing.assert_allclose(sorted(r.h for r in parallel.trace),
                                   sorted(r.h for r in serial.trace), atol=1e-10)
        np.testing.assert_allclose(parallel.weights, serial.weights, atol=1e-6)


class TestBaselines:
    def test_equal(self, rng):
        views = [as_view(random_connected_graph(rng, 20, 0.2), i) for i in range(4)]
        result = baseline_weights("equal", views, 2)
        np.testing.assert_allclose(result.weights, 0.25)
        assert result.evaluations == 1

    def test_single_is_one_based(self, rng):
        views = [as_view(random_connected_graph(rng, 20, 0.2), i) for i in range(3)]
        result = baseline_weights("single", views, 2, view=2)
        np.testing.assert_array_equal(result.weights, [0.0, 1.0, 0.0])
        assert result.method == "single=2"
        np.testing.assert_allclose(result.laplacian.toarray(), views[1].matrix.toarray())

    @pytest.mark.parametrize("view", [None, 0, 4])
    def test_single_rejects_bad_index(self, rng, view):
        views = [as_view(random_connected_graph(rng, 20, 0.2), i) for i in range(3)]
        with pytest.raises(InvalidParameter):
            baseline_weights("single", views, 2, view=view)

    def test_connectivity_prefers_the_connected_view(self, triangles):
        k6 = graph(6, clique_edges(range(6)))
        result = baseline_weights("connectivity", [as_view(triangles), as_view(k6, 1)], 2)
        assert result.method == "connectivity-only"
        assert result.weights[1] > result.weights[0]

    def test_eigengap_prefers_the_view_with_k_components(self, triangles):
        # on the complement of the shared null vector: lambda_2 = 1.2 w2, lambda_3 = 1.5 w1 + 1.2 w2
        k6 = graph(6, clique_edges(range(6)))
        result = baseline_weights("eigengap", [as_view(triangles), as_view(k6, 1)], 2)
        assert result.method == "eigengap-only"
        assert result.weights[0] > 0.75
        assert result.evaluations >= 2

    def test_graph_aggregation(self, triangles):
        result = baseline_weights("graph-agg", [as_view(triangles), as_view(triangles, 1)], 2)
        np.testing.assert_allclose(result.laplacian.toarray(), as_view(triangles).matrix.toarray(),
                                   atol=1e-14)

    def test_graph_aggregation_needs_adjacency(self, triangles):
        view = as_view(triangles)
        bare = type(view)(view.matrix, view.source)
        with pytest.raises(InvalidParameter):
            baseline_weights("graph-agg", [view, bare], 2)

    def test_unknown_mode(self, triangles):
        with pytest.raises(InvalidParameter):
            baseline_weights("median", [as_view(triangles)], 2)

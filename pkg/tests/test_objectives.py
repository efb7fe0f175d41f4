"""Tests for the tensor-decomposition objectives."""

import numpy as np
import pytest

from strict_saddle.analysis import fd_gradient
from strict_saddle.ica import SimpleSampler
from strict_saddle.objectives import (
    SmoothnessBudget,
    correlation_objective,
    estimate_oracle_bound,
    estimate_smoothness,
    known_minima,
    make_objective,
    maxeig_objective,
    nearest_known_minimum,
    quadratic_objective,
    reconstruction_objective,
)
from strict_saddle.tensor4 import OrthoBasis, make_orthogonal_tensor
from strict_saddle.utils import relative_error


@pytest.fixture
def problems(tensor3):
    return [
        maxeig_objective(tensor3),
        correlation_objective(tensor3),
        correlation_objective(tensor3, halved=True),
        reconstruction_objective(tensor3),
    ]


class TestMaxEig:
    def test_values(self, basis3, tensor3):
        problem = maxeig_objective(tensor3)
        a = basis3.vectors
        assert problem.value(a[0]) == pytest.approx(-1.0, abs=1e-12)
        assert problem.value((a[0] + a[1]) / np.sqrt(2)) == pytest.approx(-0.5, abs=1e-12)

    def test_single_sphere(self, tensor3):
        problem = maxeig_objective(tensor3)
        assert problem.dim == 3
        assert problem.constraints.m == 1


class TestReconstruction:
    def test_zero_at_ground_truth(self, basis3, tensor3):
        problem = reconstruction_objective(tensor3)
        assert problem.value(basis3.vectors.reshape(-1)) == pytest.approx(0.0, abs=1e-12)

    def test_sign_symmetry_in_one_dimension(self):
        problem = reconstruction_objective(make_orthogonal_tensor(np.array([[1.0]])))
        assert problem.value(np.array([-1.0])) == 0.0


class TestCorrelation:
    def test_zero_at_signed_permutation(self, basis3, tensor3):
        problem = correlation_objective(tensor3)
        U = (np.array([1.0, -1.0, 1.0])[:, None] * basis3.vectors)[[2, 0, 1]]
        assert problem.value(U.reshape(-1)) == pytest.approx(0.0, abs=1e-12)

    def test_repeated_component(self):
        basis = OrthoBasis.random(2, np.random.default_rng(5))
        problem = correlation_objective(make_orthogonal_tensor(basis))
        a1 = basis.vectors[0]
        assert problem.value(np.concatenate([a1, a1])) == pytest.approx(2.0, abs=1e-12)

    def test_nonnegative(self, tensor3, rng):
        problem = correlation_objective(tensor3)
        for _ in range(20):
            assert problem.value(problem.random_feasible(rng)) >= 0.0

    def test_halved_view_is_half(self, tensor3, rng):
        full, half = correlation_objective(tensor3), correlation_objective(tensor3, halved=True)
        w = full.random_feasible(rng)
        assert half.value(w) == pytest.approx(0.5 * full.value(w), rel=1e-12)
        np.testing.assert_allclose(half.gradient(w), 0.5 * full.gradient(w), atol=1e-12)
        assert half.name == "correlation-halved"

    def test_invariant_to_row_permutation_and_signs(self, tensor3, rng):
        problem = correlation_objective(tensor3)
        U = problem.rows(problem.random_feasible(rng))
        transformed = (np.array([-1.0, 1.0, -1.0])[:, None] * U)[[1, 2, 0]]
        assert problem.value(transformed.reshape(-1)) == pytest.approx(problem.value(U.reshape(-1)), rel=1e-12)


class TestDerivatives:
    def test_gradients_match_finite_differences(self, problems, rng):
        for problem in problems:
            for _ in range(5):
                w = problem.random_feasible(rng)
                assert relative_error(problem.gradient(w), fd_gradient(problem.value, w)) <= 1e-6, problem.name

    def test_hessians_match_finite_differences_of_gradient(self, problems, rng):
        from strict_saddle.analysis import fd_jacobian

        for problem in problems:
            w = problem.random_feasible(rng)
            assert relative_error(problem.hessian(w), fd_jacobian(problem.gradient, w)) <= 1e-6, problem.name

    def test_closed_form_values(self, tensor3, rng):
        for problem in (maxeig_objective(tensor3), correlation_objective(tensor3), correlation_objective(tensor3, halved=True)):
            w = problem.random_feasible(rng)
            assert problem.closed_form_value(w) == pytest.approx(problem.value(w), abs=1e-10)

    def test_closed_forms_need_a_basis(self, tensor3):
        from strict_saddle.tensor4 import Tensor4

        problem = maxeig_objective(Tensor4(tensor3.entries))
        with pytest.raises(ValueError, match="orthonormal basis"):
            problem.closed_form_value(np.array([1.0, 0.0, 0.0]))


class TestStochasticGradients:
    def test_exact_gradient_without_sample(self, problems, rng):
        for problem in problems:
            w = problem.random_feasible(rng)
            np.testing.assert_array_equal(problem.stochastic_gradient(w), problem.gradient(w))

    def test_simple_sampler_is_unbiased(self, basis3, problems, rng):
        outcomes = 3**0.25 * basis3.vectors
        for problem in problems:
            w = problem.random_feasible(rng)
            mean = np.mean([problem.stochastic_gradient(w, x) for x in outcomes], axis=0)
            np.testing.assert_allclose(mean, problem.gradient(w), atol=1e-12)

    def test_batch_gradient_is_mean_of_singles(self, basis3, tensor3, rng):
        problem = correlation_objective(tensor3)
        w = problem.random_feasible(rng)
        batch = SimpleSampler(basis3, batch_size=7)(rng)
        singles = np.mean([problem.sample_gradient(w, x) for x in batch], axis=0)
        np.testing.assert_allclose(problem.sample_gradient(w, batch), singles, atol=1e-12)

    def test_oracle_bound_dominates_deviations(self, basis3, tensor3, rng):
        problem = correlation_objective(tensor3)
        sampler = SimpleSampler(basis3)
        Q = estimate_oracle_bound(problem, sampler, np.random.default_rng(0))
        for _ in range(200):
            w = problem.random_feasible(rng)
            assert np.linalg.norm(problem.stochastic_gradient(w, sampler(rng)) - problem.gradient(w)) <= Q

    def test_lazy_oracle_bound(self, tensor3):
        problem = maxeig_objective(tensor3)
        assert problem.oracle_bound > 0
        assert problem.oracle_bound == problem.oracle_bound


class TestQuadratic:
    def test_gradient_vanishes_at_center(self):
        q = quadratic_objective(np.ones(3), np.zeros(3), np.eye(3))
        np.testing.assert_array_equal(q.gradient(np.ones(3)), np.zeros(3))

    def test_indefinite_gradient(self):
        g = np.array([0.5, -0.25])
        q = quadratic_objective(np.zeros(2), g, np.diag([1.0, -1.0]))
        np.testing.assert_allclose(q.gradient(np.array([1.0, 1.0])), g + np.array([1.0, -1.0]))

    def test_rejects_non_symmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            quadratic_objective(np.zeros(2), np.zeros(2), np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_sample_is_additive(self):
        q = quadratic_objective(np.zeros(2), np.ones(2), np.eye(2))
        np.testing.assert_allclose(q.stochastic_gradient(np.zeros(2), np.array([0.1, -0.1])), [1.1, 0.9])


class TestMinima:
    def test_known_minima_counts(self, tensor3):
        assert len(known_minima(maxeig_objective(tensor3))) == 6
        assert len(known_minima(correlation_objective(tensor3))) == 48

    def test_known_minima_refuses_large_d(self):
        T = make_orthogonal_tensor(OrthoBasis.standard(7))
        with pytest.raises(ValueError, match="refusing"):
            known_minima(correlation_objective(T))

    def test_nearest_known_minimum(self, basis3, tensor3):
        problem = correlation_objective(tensor3)
        target = (np.array([-1.0, 1.0, 1.0])[:, None] * basis3.vectors)[[1, 0, 2]].reshape(-1)
        point, distance = nearest_known_minimum(problem, target)
        np.testing.assert_allclose(point, target, atol=1e-12)
        assert distance == pytest.approx(0.0, abs=1e-12)

    def test_nearest_maxeig_minimum(self, basis3, tensor3):
        problem = maxeig_objective(tensor3)
        w = -0.9 * basis3.vectors[1] + 0.1 * basis3.vectors[2]
        point, _ = nearest_known_minimum(problem, w / np.linalg.norm(w))
        np.testing.assert_allclose(point, -basis3.vectors[1])


class TestFactories:
    def test_make_objective(self, tensor3):
        assert make_objective("reconstruction", tensor3).kind == "reconstruction"
        with pytest.raises(ValueError, match="unknown objective"):
            make_objective("nope", tensor3)

    def test_smoothness_budget(self, tensor3, rng):
        budget = estimate_smoothness(maxeig_objective(tensor3), rng, n_probes=20)
        assert budget.B <= 1.0 + 1e-12
        assert budget.beta > 0 and budget.rho > 0

    def test_budget_rejects_negative(self):
        with pytest.raises(ValueError):
            SmoothnessBudget(B=-1.0, beta=1.0, rho=1.0)

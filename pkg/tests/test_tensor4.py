"""Tests for dense 4th-order tensors and their multilinear forms."""

from itertools import product

import numpy as np
import pytest

from strict_saddle.tensor4 import (
    ComponentMatrix,
    OrthoBasis,
    Tensor4,
    contract_pair,
    form_bilinear,
    form_matrix,
    form_scalar,
    form_vector,
    load_tensor,
    make_orthogonal_tensor,
    rank_one_sum,
    reconstruction_error,
    save_tensor,
    to_basis_coordinates,
)


def brute_force_vector(T, u):
    d = T.d
    out = np.zeros(d)
    for a, b, c, e in product(range(d), repeat=4):
        out[a] += T.entries[a, b, c, e] * u[b] * u[c] * u[e]
    return out


class TestOrthoBasis:
    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError, match="orthonormal"):
            OrthoBasis(np.array([[1.0, 0.0], [1.0, 1.0]]))

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            OrthoBasis(np.ones((2, 3)))

    def test_random_basis_is_orthonormal(self, rng):
        basis = OrthoBasis.random(6, rng)
        np.testing.assert_allclose(basis.vectors @ basis.vectors.T, np.eye(6), atol=1e-12)

    def test_vectors_are_read_only(self, basis3):
        with pytest.raises(ValueError):
            basis3.vectors[0, 0] = 2.0


class TestMakeOrthogonalTensor:
    def test_standard_basis_is_diagonal(self):
        T = make_orthogonal_tensor(OrthoBasis.standard(3))
        expected = np.zeros((3, 3, 3, 3))
        for i in range(3):
            expected[i, i, i, i] = 1.0
        np.testing.assert_array_equal(T.entries, expected)

    def test_one_dimensional(self):
        T = make_orthogonal_tensor(np.array([[1.0]]))
        assert T.d == 1
        assert T.entries.reshape(-1).tolist() == [1.0]

    def test_forms_on_its_own_basis(self, basis3, tensor3):
        a = basis3.vectors
        for i in range(3):
            assert form_scalar(tensor3, a[i], a[i], a[i], a[i], dense=True) == pytest.approx(1.0, abs=1e-12)
            for j in range(3):
                if i != j:
                    assert form_scalar(tensor3, a[i], a[i], a[j], a[j], dense=True) == pytest.approx(0.0, abs=1e-12)

    def test_symmetric_under_all_permutations(self, tensor3):
        assert tensor3.is_symmetric(tol=1e-12)

    def test_rejects_non_orthonormal_rows(self):
        with pytest.raises(ValueError):
            make_orthogonal_tensor(np.array([[1.0, 0.1], [0.0, 1.0]]))

    def test_wrong_entry_count(self):
        with pytest.raises(ValueError, match="d\\^4"):
            Tensor4(np.zeros(15))


class TestForms:
    def test_standard_examples(self):
        T = make_orthogonal_tensor(OrthoBasis.standard(4))
        e = np.eye(4)
        assert form_scalar(T, e[0], e[0], e[0], e[0]) == 1.0
        assert form_scalar(T, e[0], e[0], e[1], e[1]) == 0.0
        np.testing.assert_allclose(form_vector(T, e[0]), e[0])
        u = (e[0] + e[1]) / np.sqrt(2)
        np.testing.assert_allclose(form_vector(T, u), [2**-1.5, 2**-1.5, 0, 0], atol=1e-15)
        expected = np.zeros((4, 4))
        expected[0, 0] = 1.0
        np.testing.assert_allclose(form_matrix(T, e[0]), expected)
        np.testing.assert_allclose(form_matrix(T, np.zeros(4)), np.zeros((4, 4)))

    def test_sum_of_fourth_powers(self, basis3, tensor3, rng):
        x = rng.standard_normal(3)
        u = x @ basis3.vectors
        assert form_scalar(tensor3, u, u, u, u) == pytest.approx(np.sum(x**4), rel=1e-12)

    def test_vector_matches_brute_force(self, tensor3, rng):
        u = rng.standard_normal(3)
        np.testing.assert_allclose(form_vector(tensor3, u), brute_force_vector(tensor3, u), rtol=1e-12, atol=1e-14)

    @pytest.mark.parametrize("dense", [True, False])
    def test_consistency_chain(self, tensor3, rng, dense):
        u = rng.standard_normal(3)
        s = form_scalar(tensor3, u, u, u, u, dense=dense)
        assert u @ form_vector(tensor3, u, dense=dense) == pytest.approx(s, rel=1e-10)
        assert u @ form_matrix(tensor3, u, dense=dense) @ u == pytest.approx(s, rel=1e-10)

    def test_multilinearity(self, tensor3, rng):
        u, u2, v, w, z = rng.standard_normal((5, 3))
        alpha, beta = 0.7, -1.3
        lhs = form_scalar(tensor3, alpha * u + beta * u2, v, w, z)
        rhs = alpha * form_scalar(tensor3, u, v, w, z) + beta * form_scalar(tensor3, u2, v, w, z)
        assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_fast_path_matches_dense(self, tensor3, rng):
        u, v, w, z = rng.standard_normal((4, 3))
        P = rng.standard_normal((3, 3))
        assert form_scalar(tensor3, u, v, w, z) == pytest.approx(form_scalar(tensor3, u, v, w, z, dense=True), rel=1e-12)
        np.testing.assert_allclose(form_vector(tensor3, u, v, w), form_vector(tensor3, u, v, w, dense=True), atol=1e-12)
        np.testing.assert_allclose(form_bilinear(tensor3, v, w), form_bilinear(tensor3, v, w, dense=True), atol=1e-12)
        np.testing.assert_allclose(contract_pair(tensor3, P), contract_pair(tensor3, P, dense=True), atol=1e-12)

    def test_dimension_mismatch(self, tensor3):
        with pytest.raises(ValueError, match="dimension"):
            form_vector(tensor3, np.ones(4))
        with pytest.raises(ValueError, match="dimension"):
            form_scalar(tensor3, np.ones(3), np.ones(3), np.ones(2), np.ones(3))


class TestReconstructionError:
    def test_zero_at_ground_truth(self, basis3, tensor3):
        assert reconstruction_error(tensor3, basis3.vectors) <= 1e-12

    def test_invariant_to_permutation_and_signs(self, basis3, tensor3, rng):
        U = rng.standard_normal((3, 3))
        U /= np.linalg.norm(U, axis=1, keepdims=True)
        flipped = (np.array([-1.0, 1.0, -1.0])[:, None] * U)[[2, 0, 1]]
        assert reconstruction_error(tensor3, flipped) == pytest.approx(reconstruction_error(tensor3, U), rel=1e-12)
        signed_perm = (np.array([1.0, -1.0, -1.0])[:, None] * basis3.vectors)[[1, 2, 0]]
        assert reconstruction_error(tensor3, signed_perm) <= 1e-12

    def test_matches_direct_summation(self):
        T = make_orthogonal_tensor(OrthoBasis.standard(2))
        U = ComponentMatrix(np.array([[0.6, 0.8], [1.0, 0.0]]))
        approx = np.zeros((2, 2, 2, 2))
        for u in U.rows:
            for idx in product(range(2), repeat=4):
                approx[idx] += np.prod(u[list(idx)])
        expected = np.sum((T.entries - approx) ** 2) / np.sum(T.entries**2)
        assert reconstruction_error(T, U) == pytest.approx(expected, rel=1e-12)

    def test_zero_tensor(self):
        with pytest.raises(ValueError, match="zero tensor"):
            reconstruction_error(Tensor4(np.zeros(16)), np.eye(2))


class TestHelpers:
    def test_rank_one_sum_of_basis_is_orthogonal_tensor(self, basis3, tensor3):
        np.testing.assert_allclose(rank_one_sum(basis3.vectors).entries, tensor3.entries, atol=1e-14)

    def test_basis_coordinates(self, basis3):
        np.testing.assert_allclose(to_basis_coordinates(basis3, basis3.vectors), np.eye(3), atol=1e-14)

    def test_component_matrix_flat_round_trip(self, rng):
        U = ComponentMatrix.random(3, rng)
        assert U.is_feasible()
        np.testing.assert_array_equal(ComponentMatrix.from_flat(U.flat, 3).rows, U.rows)

    def test_save_and_load(self, tensor3, tmp_path):
        path = tmp_path / "tensor.txt"
        save_tensor(tensor3, path)
        assert path.read_text().splitlines()[0] == "d=3"
        np.testing.assert_array_equal(load_tensor(path).entries, tensor3.entries)

    def test_load_rejects_bad_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("n=2\n1\n")
        with pytest.raises(ValueError, match="header"):
            load_tensor(path)

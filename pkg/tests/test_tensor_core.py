import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxqtc.tensor_core import (DenseTensor, FactorSet, Observations, evaluate, evaluate_at,
                                frobenius_norm, hadamard, inf_norm, khatri_rao, khatri_rao_list,
                                kronecker, matricize, matricized_column, mttkrp, other_factors,
                                two_inf_norm, unmatricize)


def random_factors(rng, dims, r):
    return FactorSet(tuple(rng.standard_normal((n, r)) for n in dims))


def brute_evaluate(f):
    out = np.zeros(f.dims)
    for idx in itertools.product(*(range(n) for n in f.dims)):
        for l in range(f.rank):
            p = 1.0
            for U, j in zip(f, idx):
                p *= U[j, l]
            out[idx] += p
    return out


class TestEvaluate:
    def test_identity_matrix(self):
        T = evaluate(FactorSet((np.eye(2), np.eye(2))))
        np.testing.assert_array_equal(T.values, np.eye(2))

    def test_rank_one_ones(self):
        T = evaluate(FactorSet((np.ones((2, 1)),) * 3))
        np.testing.assert_array_equal(T.values, np.ones((2, 2, 2)))

    def test_matches_triple_loop(self, rng):
        f = random_factors(rng, (4, 4, 4), 2)
        np.testing.assert_allclose(evaluate(f).values, brute_evaluate(f), rtol=1e-13, atol=1e-13)

    def test_nonsquare_order_four(self, rng):
        f = random_factors(rng, (2, 3, 4, 2), 3)
        np.testing.assert_allclose(evaluate(f).values, brute_evaluate(f), rtol=1e-12, atol=1e-12)

    def test_evaluate_at_matches_dense(self, rng):
        f = random_factors(rng, (3, 5, 4), 2)
        idx = np.array([[0, 0, 0], [2, 4, 3], [1, 2, 0]])
        np.testing.assert_allclose(evaluate_at(f, idx), evaluate(f).values[tuple(idx.T)])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            FactorSet((np.ones((2, 2)), np.ones((2, 3))))

    def test_multilinear(self, rng):
        f = random_factors(rng, (3, 4, 2), 2)
        V = rng.standard_normal((4, 2))
        a, b = 1.7, -0.3
        lhs = evaluate(f.replace(1, a * f[1] + b * V)).values
        rhs = a * evaluate(f).values + b * evaluate(f.replace(1, V)).values
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


class TestMatricize:
    def test_column_formula_example(self):
        # 1-based (1,2,1), dims (2,2,2), mode 1 -> column k = 2, i.e. 0-based 1
        assert matricized_column((0, 1, 0), (2, 2, 2), 0) == 1

    def test_entries_follow_column_formula(self, rng):
        dims = (2, 3, 4)
        T = DenseTensor(rng.standard_normal(dims))
        for mode in range(3):
            M = matricize(T, mode)
            for idx in itertools.product(*(range(n) for n in dims)):
                assert M[idx[mode], matricized_column(idx, dims, mode)] == T.values[idx]

    def test_shape(self):
        T = DenseTensor(np.zeros((2, 3, 4)))
        assert matricize(T, 1).shape == (3, 8)

    def test_cp_unfolding(self, rng):
        f = random_factors(rng, (3, 4, 5), 2)
        T = evaluate(f)
        for mode in range(3):
            K = khatri_rao_list(other_factors(f, mode))
            np.testing.assert_allclose(matricize(T, mode), f[mode] @ K.T, rtol=1e-12, atol=1e-12)

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            matricize(DenseTensor(np.zeros((2, 2))), 2)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(1, 6), min_size=2, max_size=5), st.data())
    def test_round_trip(self, dims, data):
        if np.prod(dims) > 10**4:
            return
        mode = data.draw(st.integers(0, len(dims) - 1))
        T = DenseTensor(np.arange(np.prod(dims), dtype=float).reshape(dims))
        np.testing.assert_array_equal(unmatricize(matricize(T, mode), mode, dims).values, T.values)


class TestKhatriRao:
    def test_scalar(self):
        np.testing.assert_array_equal(khatri_rao([[1.0]], [[1.0]]), [[1.0]])

    def test_identities(self):
        K = khatri_rao(np.eye(2), np.eye(2))
        expected = np.zeros((4, 2))
        expected[0, 0] = 1.0
        expected[3, 1] = 1.0
        np.testing.assert_array_equal(K, expected)

    def test_shape(self, rng):
        assert khatri_rao(rng.random((3, 2)), rng.random((4, 2))).shape == (12, 2)

    def test_index_formula(self, rng):
        A, B = rng.random((3, 2)), rng.random((4, 2))
        K = khatri_rao(A, B)
        for a in range(3):
            for b in range(4):
                np.testing.assert_array_equal(K[b + 4 * a], A[a] * B[b])

    def test_column_mismatch(self):
        with pytest.raises(ValueError):
            khatri_rao(np.ones((2, 2)), np.ones((2, 3)))


class TestProducts:
    def test_kron_with_scalar_one(self, rng):
        T = DenseTensor(rng.standard_normal((2, 3)))
        np.testing.assert_array_equal(kronecker(T, DenseTensor(np.ones((1, 1)))).values, T.values)

    def test_kron_matches_matrix_kron(self, rng):
        A, B = rng.standard_normal((2, 2)), rng.standard_normal((2, 2))
        K = kronecker(DenseTensor(A), DenseTensor(B)).values
        expected = np.empty((4, 4))
        for i1, i2, j1, j2 in itertools.product(range(2), repeat=4):
            expected[j1 + 2 * i1, j2 + 2 * i2] = A[i1, i2] * B[j1, j2]
        np.testing.assert_array_equal(K, expected)

    def test_kron_inf_norm(self, rng):
        T = DenseTensor(rng.standard_normal((2, 3, 2)))
        S = DenseTensor(rng.standard_normal((3, 2, 2)))
        assert inf_norm(kronecker(T, S)) == pytest.approx(inf_norm(T) * inf_norm(S), rel=1e-14)

    def test_kron_order_mismatch(self):
        with pytest.raises(ValueError):
            kronecker(DenseTensor(np.ones((2, 2))), DenseTensor(np.ones((2, 2, 2))))

    def test_hadamard_identity_and_square(self, rng):
        T = DenseTensor(rng.standard_normal((3, 2, 2)))
        J = DenseTensor(np.ones((3, 2, 2)))
        np.testing.assert_array_equal(hadamard(T, J).values, T.values)
        np.testing.assert_array_equal(hadamard(T, T).values, T.values**2)

    def test_hadamard_inside_kronecker(self, rng):
        dims = (3, 2, 4)
        T = DenseTensor(rng.standard_normal(dims))
        S = DenseTensor(rng.standard_normal(dims))
        H = hadamard(T, S).values
        K = kronecker(T, S).values
        for idx in itertools.product(*(range(n) for n in dims)):
            k = tuple(i + n * i for i, n in zip(idx, dims))
            assert K[k] == H[idx]

    def test_hadamard_dim_mismatch(self):
        with pytest.raises(ValueError):
            hadamard(DenseTensor(np.ones((2, 2))), DenseTensor(np.ones((2, 3))))


class TestNorms:
    def test_two_inf_identity(self):
        assert two_inf_norm(np.eye(5)) == 1.0

    def test_two_inf_rows(self):
        assert two_inf_norm([[3.0, 4.0], [0.5, 0.0]]) == 5.0

    def test_two_inf_zero(self):
        assert two_inf_norm(np.zeros((3, 2))) == 0.0

    def test_two_inf_kron_multiplicative(self, rng):
        for _ in range(20):
            A = rng.standard_normal((rng.integers(1, 5), rng.integers(1, 4)))
            B = rng.standard_normal((rng.integers(1, 5), rng.integers(1, 4)))
            assert two_inf_norm(np.kron(A, B)) == pytest.approx(
                two_inf_norm(A) * two_inf_norm(B), rel=1e-12)

    def test_ones_cube(self):
        T = DenseTensor(np.ones((2, 2, 2)))
        assert frobenius_norm(T) == pytest.approx(np.sqrt(8))
        assert inf_norm(T) == 1.0

    def test_homogeneity_and_order(self, rng):
        T = DenseTensor(rng.standard_normal((3, 3, 2)))
        c = -2.5
        cT = DenseTensor(c * T.values)
        assert frobenius_norm(cT) == pytest.approx(abs(c) * frobenius_norm(T))
        assert inf_norm(cT) == pytest.approx(abs(c) * inf_norm(T))
        assert inf_norm(T) <= frobenius_norm(T)


class TestDenseTensor:
    def test_order_at_least_two(self):
        with pytest.raises(ValueError):
            DenseTensor(np.ones(3))

    def test_from_flat_length(self):
        with pytest.raises(ValueError):
            DenseTensor.from_flat((2, 2), [1.0, 2.0, 3.0])

    def test_storage_order_last_fastest(self):
        T = DenseTensor.from_flat((2, 3), np.arange(6.0))
        assert T[0, 1] == 1.0 and T[1, 0] == 3.0

    def test_immutable(self):
        T = DenseTensor(np.ones((2, 2)))
        with pytest.raises(ValueError):
            T.values[0, 0] = 5.0


class TestMTTKRP:
    def test_zero_residual(self, rng):
        f = random_factors(rng, (3, 4, 5), 2)
        edges = np.array([[0, 1, 2], [2, 3, 4]])
        res = Observations(f.dims, edges, np.zeros(2))
        np.testing.assert_array_equal(mttkrp(res, f, 1), np.zeros((4, 2)))

    @pytest.mark.parametrize("dims", [(3, 4, 5), (2, 3, 2, 3), (4, 4)])
    def test_dense_oracle(self, rng, dims):
        f = random_factors(rng, dims, 3)
        R = rng.standard_normal(dims)
        edges = np.array(list(itertools.product(*(range(n) for n in dims))))
        res = Observations(dims, edges, R[tuple(edges.T)])
        for mode in range(len(dims)):
            dense = matricize(DenseTensor(R), mode) @ khatri_rao_list(other_factors(f, mode))
            np.testing.assert_allclose(mttkrp(res, f, mode), dense, rtol=1e-10, atol=1e-12)

    def test_single_entry(self, rng):
        f = random_factors(rng, (3, 4, 5), 2)
        res = Observations(f.dims, np.array([[0, 0, 0]]), np.array([1.0]))
        out = mttkrp(res, f, 0)
        np.testing.assert_allclose(out[0], f[1][0] * f[2][0])
        np.testing.assert_array_equal(out[1:], 0.0)

    def test_index_out_of_bounds(self):
        with pytest.raises(IndexError):
            Observations((2, 2), np.array([[0, 2]]), np.array([1.0]))

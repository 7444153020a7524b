import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sepcore import matcore
from sepcore.errors import NegativeEigenvalue, NotPositiveDefinite
from sepcore.matcore import (
    Shape,
    cholesky,
    eig_sym,
    kron,
    kron_conjugate,
    numerical_rank,
    partial_trace_1,
    partial_trace_2,
    rearrange,
    rearrange_inverse,
    singular_values,
    sym_sqrt,
)

from conftest import random_spd

SMALL_SHAPES = [Shape(2, 2), Shape(2, 3), Shape(3, 2), Shape(4, 2), Shape(3, 3)]

shape_strategy = st.tuples(st.integers(1, 4), st.integers(1, 4)).map(lambda t: Shape(*t))


def brute_partial_trace_1(m, shape):
    out = np.zeros((shape.p1, shape.p1))
    for i in range(shape.p2):
        out += m[i * shape.p1:(i + 1) * shape.p1, i * shape.p1:(i + 1) * shape.p1]
    return out


def brute_partial_trace_2(m, shape):
    out = np.zeros((shape.p2, shape.p2))
    for i in range(shape.p2):
        for j in range(shape.p2):
            out[i, j] = np.trace(m[i * shape.p1:(i + 1) * shape.p1, j * shape.p1:(j + 1) * shape.p1])
    return out


def charpoly_roots(m):
    # Faddeev-LeVerrier coefficients, then companion-matrix roots; no eigh
    n = m.shape[0]
    coeffs = [1.0]
    mk = np.zeros_like(m)
    c = 1.0
    for k in range(1, n + 1):
        mk = m @ (mk + c * np.eye(n))
        c = -np.trace(mk) / k
        coeffs.append(c)
    return np.sort(np.roots(coeffs).real)[::-1]


class TestShape:
    def test_product(self):
        assert Shape(3, 4).p == 12

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            Shape(0, 2)


class TestKron:
    def test_identity(self):
        assert np.array_equal(kron(np.eye(2), np.eye(2)), np.eye(4))

    def test_scalar(self):
        assert np.array_equal(kron(np.array([[2.0]]), np.array([[3.0]])), np.array([[6.0]]))

    def test_diag_spectrum(self):
        m = kron(np.diag([5.0, 2.0]), np.eye(2))
        assert np.allclose(np.sort(np.linalg.eigvalsh(m)), [2.0, 2.0, 5.0, 5.0])

    @given(
        a=st.integers(1, 3), b=st.integers(1, 3), c=st.integers(1, 3),
        seed=st.integers(0, 2**32 - 1),
    )
    @settings(max_examples=25, deadline=None)
    def test_mixed_product(self, a, b, c, seed):
        r = np.random.default_rng(seed)
        A, C = r.standard_normal((a, b)), r.standard_normal((b, c))
        B, D = r.standard_normal((b, a)), r.standard_normal((a, b))
        lhs = kron(A, B) @ kron(C, D)
        rhs = kron(A @ C, B @ D)
        assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-12)


class TestPartialTraces:
    def test_identity_blocks(self):
        s = Shape(2, 2)
        assert np.array_equal(partial_trace_1(np.eye(4), s), 2 * np.eye(2))
        assert np.array_equal(partial_trace_2(np.eye(4), s), 2 * np.eye(2))

    @pytest.mark.parametrize("shape", SMALL_SHAPES)
    def test_matches_blockwise_oracle(self, rng, shape):
        m = rng.standard_normal((shape.p, shape.p))
        m = m + m.T
        assert np.allclose(partial_trace_1(m, shape), brute_partial_trace_1(m, shape), atol=1e-12)
        assert np.allclose(partial_trace_2(m, shape), brute_partial_trace_2(m, shape), atol=1e-12)

    @pytest.mark.parametrize("shape", [Shape(2, 3), Shape(4, 2)])
    def test_kronecker_contraction(self, rng, shape):
        k1 = random_spd(rng, shape.p1)
        k2 = random_spd(rng, shape.p2)
        m = np.kron(k2, k1)
        assert np.allclose(partial_trace_1(m, shape), np.trace(k2) * k1, rtol=1e-12, atol=1e-12)
        assert np.allclose(partial_trace_2(m, shape), np.trace(k1) * k2, rtol=1e-12, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            partial_trace_1(np.eye(5), Shape(2, 2))

    @given(shape=shape_strategy, seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_trace_consistency(self, shape, seed):
        m = np.random.default_rng(seed).standard_normal((shape.p, shape.p))
        t = np.trace(m)
        scale = max(abs(t), 1.0)
        assert abs(np.trace(partial_trace_1(m, shape)) - t) <= 1e-10 * scale
        assert abs(np.trace(partial_trace_2(m, shape)) - t) <= 1e-10 * scale


class TestRearrange:
    @pytest.mark.parametrize("shape", SMALL_SHAPES)
    def test_kron_becomes_rank_one(self, rng, shape):
        a = rng.standard_normal((shape.p2, shape.p2))
        b = rng.standard_normal((shape.p1, shape.p1))
        r = rearrange(np.kron(a, b), shape)
        expected = np.outer(a.reshape(-1, order="F"), b.reshape(-1, order="F"))
        assert np.allclose(r, expected, atol=1e-14)
        assert numerical_rank(singular_values(r)) == 1

    @given(shape=shape_strategy, seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_isometry_and_roundtrip(self, shape, seed):
        m = np.random.default_rng(seed).standard_normal((shape.p, shape.p))
        m = m + m.T
        r = rearrange(m, shape)
        # entries are an exact permutation; summation order may differ by an ulp
        assert np.array_equal(np.sort(r.ravel()), np.sort(m.ravel()))
        assert abs(np.linalg.norm(r) - np.linalg.norm(m)) <= 1e-14 * np.linalg.norm(m)
        assert np.array_equal(rearrange_inverse(r, shape), m)

    @pytest.mark.parametrize("shape", [Shape(2, 3), Shape(3, 2), Shape(4, 2)])
    def test_outer_product_identity(self, rng, shape):
        a = rng.standard_normal(shape.p)
        mat = a.reshape(shape.p1, shape.p2, order="F")
        r = rearrange(np.outer(a, a), shape)
        assert np.allclose(r, np.kron(mat.T, mat.T), atol=1e-14)

    @pytest.mark.parametrize("terms", [1, 2, 3])
    def test_rank_counts_separable_terms(self, rng, terms):
        shape = Shape(3, 4)
        m = np.zeros((shape.p, shape.p))
        for _ in range(terms):
            a = rng.standard_normal((shape.p2, shape.p2))
            b = rng.standard_normal((shape.p1, shape.p1))
            m += np.kron(a, b)
        assert numerical_rank(singular_values(rearrange(m, shape))) == terms


class TestCholesky:
    def test_identity(self):
        assert np.array_equal(cholesky(np.eye(3)), np.eye(3))

    def test_scaled_identity(self):
        assert np.allclose(cholesky(4.0 * np.eye(2)), 2.0 * np.eye(2))

    def test_roundtrip(self, rng):
        m = random_spd(rng, 6)
        low = cholesky(m)
        assert np.allclose(low @ low.T, m, rtol=1e-10)
        assert np.allclose(low, np.tril(low))

    def test_not_positive_definite(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky(np.diag([1.0, -1.0]))


class TestSymSqrt:
    def test_identity(self):
        assert np.allclose(sym_sqrt(np.eye(4)), np.eye(4))

    def test_scaled(self):
        assert np.allclose(sym_sqrt(4.0 * np.eye(3)), 2.0 * np.eye(3))

    def test_roundtrip(self, rng):
        m = random_spd(rng, 5)
        root = sym_sqrt(m)
        assert np.allclose(root @ root, m, rtol=1e-10)
        assert np.allclose(root, root.T)

    def test_clamps_roundoff_negatives(self, rng):
        g = rng.standard_normal((4, 2))
        m = g @ g.T  # rank 2, eigenvalues ~ -1e-17 possible
        root = sym_sqrt(m)
        assert np.allclose(root @ root, m, atol=1e-10)

    def test_rejects_negative(self):
        with pytest.raises(NegativeEigenvalue):
            sym_sqrt(np.diag([1.0, -0.5]))


class TestEigSym:
    def test_identity(self):
        values, vectors = eig_sym(np.eye(5))
        assert np.allclose(values, np.ones(5))
        assert np.allclose(vectors @ vectors.T, np.eye(5), atol=1e-9)

    def test_diagonal(self):
        values, _ = eig_sym(np.diag([3.0, 1.0]))
        assert np.allclose(values, [3.0, 1.0])

    @pytest.mark.parametrize("dim", [2, 3, 4])
    def test_matches_charpoly_roots(self, rng, dim):
        m = rng.standard_normal((dim, dim))
        m = (m + m.T) / 2
        values, vectors = eig_sym(m)
        assert np.allclose(values, charpoly_roots(m), atol=1e-8)
        assert np.allclose(m @ vectors, vectors * values, atol=1e-9)
        assert np.all(np.diff(values) <= 1e-12)


class TestSingularValues:
    def test_identity(self):
        assert np.allclose(singular_values(np.eye(4)), np.ones(4))

    def test_matches_gram_eigenvalues(self, rng):
        m = rng.standard_normal((4, 6))
        gram_eigs = np.sort(np.linalg.eigvalsh(m.T @ m))[::-1][:4]
        assert np.allclose(singular_values(m), np.sqrt(np.maximum(gram_eigs, 0)), atol=1e-10)

    def test_numerical_rank_threshold(self):
        assert numerical_rank(np.array([1.0, 1e-7, 1e-9])) == 2
        assert numerical_rank(np.array([0.0])) == 0


class TestKronConjugate:
    @pytest.mark.parametrize("shape", SMALL_SHAPES)
    def test_matches_dense_route(self, rng, shape):
        a1 = rng.standard_normal((shape.p1, shape.p1))
        a2 = rng.standard_normal((shape.p2, shape.p2))
        m = rng.standard_normal((shape.p, shape.p))
        m = m + m.T
        big = np.kron(a2, a1)
        assert np.allclose(kron_conjugate(a1, a2, m, shape), big @ m @ big.T, rtol=1e-10, atol=1e-10)

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fdmimo.numerics import (DomainError, exchange_matrix, kron, numerical_rank, pinv, psd_sqrt, svd, unvec, vec,
                             wrap_phase)

from conftest import crandn


def _rand(seed, m, n):
    return crandn(np.random.default_rng(seed), m, n)


def test_kron_examples():
    b = np.array([[1, 2], [3, 4]])
    np.testing.assert_array_equal(kron([1], b), b)
    np.testing.assert_array_equal(kron([[1], [0]], [[1], [1]]), [[1], [1], [0], [0]])
    a_u = np.array([1, 1])  # u = 0
    a_v = np.exp(1j * np.pi * np.arange(2))  # v = pi
    np.testing.assert_allclose(kron(a_v, a_u).ravel(), [1, 1, -1, -1], atol=1e-15)


def test_exchange_matrix():
    np.testing.assert_array_equal(exchange_matrix(1), [[1]])
    np.testing.assert_array_equal(exchange_matrix(2), [[0, 1], [1, 0]])
    p = exchange_matrix(3)
    np.testing.assert_array_equal(p @ p, np.eye(3))
    with pytest.raises(DomainError):
        exchange_matrix(0)


def test_vec_examples(rng):
    np.testing.assert_array_equal(vec([[1, 2], [3, 4]]).ravel(), [1, 3, 2, 4])
    col = np.array([[1], [2], [3]])
    np.testing.assert_array_equal(vec(col), col)
    a, x, b = crandn(rng, 2, 2), crandn(rng, 2, 2), crandn(rng, 2, 2)
    np.testing.assert_allclose(kron(b.T, a) @ vec(x), vec(a @ x @ b), atol=1e-12)
    np.testing.assert_array_equal(unvec(vec(x), 2), x)


def test_small_decompositions():
    _, s, _ = svd(np.eye(3))
    np.testing.assert_allclose(s, [1, 1, 1])
    np.testing.assert_allclose(pinv([[2]]), [[0.5]])
    np.testing.assert_allclose(psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))


def test_psd_sqrt_rejects_indefinite():
    with pytest.raises(DomainError):
        psd_sqrt(np.diag([1.0, -1e-6]))
    # tiny negative eigenvalues are clamped
    r = psd_sqrt(np.diag([1.0, -1e-12]))
    assert np.all(np.isfinite(r))


dims = st.integers(1, 64)


@given(st.integers(0, 2 ** 32 - 1), dims, dims)
def test_svd_reconstruction(seed, m, n):
    a = _rand(seed, m, n)
    u, s, v = svd(a)
    assert np.all(np.diff(s) <= 1e-12 * s[0])
    assert np.linalg.norm(a - (u * s) @ v.conj().T) <= 1e-10 * np.linalg.norm(a)


@given(st.integers(0, 2 ** 32 - 1), dims, dims, st.integers(1, 8))
def test_pinv_penrose(seed, m, n, r):
    rng = np.random.default_rng(seed)
    r = min(r, m, n)
    a = crandn(rng, m, r) @ crandn(rng, r, n)  # rank-deficient in general
    p = pinv(a)
    tol = 1e-9 * max(1.0, np.linalg.norm(a) * np.linalg.norm(p)) ** 2
    assert np.linalg.norm(a @ p @ a - a) <= tol * np.linalg.norm(a)
    assert np.linalg.norm(p @ a @ p - p) <= tol * np.linalg.norm(p)
    assert np.linalg.norm((a @ p).conj().T - a @ p) <= tol
    assert np.linalg.norm((p @ a).conj().T - p @ a) <= tol


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 32))
def test_psd_sqrt_squares_back(seed, n):
    g = _rand(seed, n, n)
    k = g @ g.conj().T
    r = psd_sqrt(k)
    np.testing.assert_allclose(r, r.conj().T, atol=1e-12 * np.linalg.norm(k))
    assert np.linalg.norm(r @ r - k) <= 1e-9 * np.linalg.norm(k)


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(1, 4))
def test_kron_mixed_product_and_associativity(seed, m, n, p, q):
    rng = np.random.default_rng(seed)
    a, b = crandn(rng, m, n), crandn(rng, p, q)
    c, d = crandn(rng, n, 2), crandn(rng, q, 3)
    np.testing.assert_allclose(kron(a, b) @ kron(c, d), kron(a @ c, b @ d), atol=1e-10 * 50)
    e = crandn(rng, 2, 2)
    np.testing.assert_allclose(kron(kron(a, b), e), kron(a, kron(b, e)), atol=1e-10)


def test_numerical_rank_and_wrap():
    assert numerical_rank(np.array([1.0, 1e-13])) == 1
    assert numerical_rank(np.array([])) == 0
    np.testing.assert_allclose(wrap_phase([np.pi, -np.pi, 3 * np.pi / 2]), [np.pi, np.pi, -np.pi / 2])

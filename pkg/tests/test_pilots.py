import numpy as np
import pytest
from hypothesis import given, strategies as st

from fdmimo.channel import ScenarioConfig, draw_scenario
from fdmimo.pilots import (InfeasibleCorrelationError, SequenceLengthError, build_pilot_book, despread,
                           despread_terms, target_gram, uplink_rx)


@st.composite
def feasible_books(draw):
    j = draw(st.integers(1, 5))
    nt = draw(st.integers(1, 4))
    q = draw(st.integers(j * nt, j * nt + 20))
    rho1 = draw(st.floats(0.0, 0.999 / nt))
    return j, nt, q, rho1


@given(feasible_books())
def test_gram_invariants(args):
    j, nt, q, rho1 = args
    book = build_pilot_book(j, nt, q, rho1)
    for a in range(j):
        np.testing.assert_allclose(book.user(a) @ book.user(a).conj().T, np.eye(nt), atol=1e-10)
        for b in range(j):
            if a != b:
                np.testing.assert_allclose(book.user(a) @ book.user(b).conj().T, rho1 * np.ones((nt, nt)), atol=1e-10)


def test_orthogonal_pool():
    book = build_pilot_book(4, 2, 16, 0.0)
    np.testing.assert_allclose(book.gram(), np.eye(8), atol=1e-12)


def test_off_diagonal_block():
    g = build_pilot_book(2, 2, 8, 0.1).gram()
    np.testing.assert_allclose(g[:2, 2:], 0.1 * np.ones((2, 2)), atol=1e-12)


def test_min_eigenvalue_of_target_gram():
    w = np.linalg.eigvalsh(target_gram(10, 8, 0.1))
    assert w.min() == pytest.approx(0.2, abs=1e-12)


def test_errors():
    with pytest.raises(InfeasibleCorrelationError):
        build_pilot_book(2, 4, 16, 0.25)
    with pytest.raises(SequenceLengthError):
        build_pilot_book(3, 4, 11, 0.0)


def _scenario(cells=1, users=1, seed=0):
    cfg = ScenarioConfig(cells=cells, users_per_cell=users, m1=3, m2=3, nt=2, num_paths=2)
    return draw_scenario(cfg, np.random.default_rng(seed))


def test_single_user_noiseless():
    sc = _scenario()
    book = build_pilot_book(1, 2, 8, 0.0)
    z = uplink_rx(sc, book, 0, 3, 0.0)
    np.testing.assert_allclose(z, np.sqrt(sc.large_scale[0, 0, 0]) * sc.channel(0, 0, 0, 3) @ book.user(0))
    np.testing.assert_allclose(despread(z, book, (0, 0)), np.sqrt(sc.large_scale[0, 0, 0]) * sc.channel(0, 0, 0, 3),
                               atol=1e-12)


def test_two_user_despread_expansion():
    sc = _scenario(users=2, seed=4)
    book = build_pilot_book(2, 2, 8, 0.1)
    z = uplink_rx(sc, book, 0, 0, 0.0)
    h = [np.sqrt(sc.large_scale[j, 0, 0]) * sc.channel(j, 0, 0, 0) for j in range(2)]
    np.testing.assert_allclose(despread(z, book, (0, 0)), h[0] + 0.1 * h[1] @ np.ones((2, 2)), atol=1e-12)


def test_superposition():
    sc = _scenario(cells=7, users=2, seed=2)
    book = build_pilot_book(2, 2, 8, 0.05)
    z = uplink_rx(sc, book, 3, 1, 0.0)
    parts = np.zeros_like(z)
    for g in range(7):
        for j in range(2):
            parts += np.sqrt(sc.large_scale[j, g, 3]) * sc.channel(j, g, 3, 1) @ book.user(j)
    np.testing.assert_allclose(z, parts, atol=1e-12)


def test_four_term_decomposition():
    sc = _scenario(cells=7, users=3, seed=7)
    book = build_pilot_book(3, 2, 12, 0.3)
    z = uplink_rx(sc, book, 2, 5, 0.0)
    terms = despread_terms(sc, book, (1, 2), 5)
    np.testing.assert_allclose(despread(z, book, (1, 2)), sum(terms.values()), atol=1e-9)


def test_noise_moments():
    sc = _scenario(users=2)
    book = build_pilot_book(2, 2, 8, 0.2)
    rng = np.random.default_rng(0)
    sigma2, n = 0.7, 4000
    clean = uplink_rx(sc, book, 0, 0, 0.0)
    w = np.stack([uplink_rx(sc, book, 0, 0, sigma2, rng) - clean for _ in range(n)])
    assert np.mean(np.sum(np.abs(w) ** 2, axis=(1, 2))) == pytest.approx(sigma2 * 9 * 8, rel=0.03)
    # despread noise per row has covariance sigma2 * X_n X_n^H = sigma2 * I
    d = np.einsum("sij,kj->sik", w, book.user(0).conj()).reshape(-1, 2)
    np.testing.assert_allclose(d.T @ d.conj() / d.shape[0], sigma2 * np.eye(2), atol=0.03)
    with pytest.raises(ValueError):
        uplink_rx(sc, book, 0, 0, 1.0)

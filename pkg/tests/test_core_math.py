import numpy as np
import pytest

from src.errors import InvalidInput
from src.numerics.core_math import (
    ComparisonSpec, centroid, compare, correlation_matrix, huber, huber_grad, kl_divergence,
    log_softmax, pearson, singular_values, stable_softmax, symmetric_eigenvalues,
)
from src.numerics.rng import RngStream


# --- softmax ---

def test_softmax_examples():
    np.testing.assert_allclose(stable_softmax([0.0, 0.0]), [0.5, 0.5])
    e = np.e
    np.testing.assert_allclose(stable_softmax([1.0, 0.0]), [e / (e + 1), 1 / (e + 1)], rtol=1e-12)
    np.testing.assert_allclose(stable_softmax([1000.0, 1000.0, 1000.0]), [1 / 3] * 3, rtol=1e-12)


def test_softmax_rejects_non_finite():
    with pytest.raises(InvalidInput):
        stable_softmax([0.0, np.inf])
    with pytest.raises(InvalidInput):
        stable_softmax([np.nan, 1.0])


def test_softmax_shift_invariance(np_rng):
    for _ in range(200):
        z = np_rng.normal(0.0, 5.0, size=7)
        c = np_rng.uniform(-1e3, 1e3)
        np.testing.assert_allclose(stable_softmax(z + c), stable_softmax(z), rtol=0, atol=1e-12)


def test_softmax_is_a_distribution(np_rng):
    z = np_rng.normal(0.0, 30.0, size=(50, 10))
    p = stable_softmax(z)
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)
    moderate = z / 10.0
    np.testing.assert_allclose(np.log(stable_softmax(moderate)), log_softmax(moderate), atol=1e-9)


# --- KL ---

def test_kl_examples():
    assert kl_divergence([0.3, 0.7], [0.3, 0.7]) == pytest.approx(0.0, abs=1e-15)
    assert kl_divergence([0.7, 0.3], [0.5, 0.5]) == pytest.approx(0.08228, abs=1e-5)
    assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(np.log(2.0), rel=1e-12)


def test_kl_clamps_zero_q():
    value = kl_divergence([0.5, 0.5], [1.0, 0.0])
    assert np.isfinite(value)
    assert value == pytest.approx(0.5 * np.log(0.5 / 1.0) + 0.5 * np.log(0.5 / 1e-12))


def test_kl_dimension_mismatch():
    with pytest.raises(InvalidInput):
        kl_divergence([0.5, 0.5], [0.2, 0.3, 0.5])


def test_kl_gibbs_inequality(np_rng):
    for _ in range(100):
        p = stable_softmax(np_rng.normal(size=6))
        q = stable_softmax(np_rng.normal(size=6))
        assert kl_divergence(p, q) >= -1e-12
        assert abs(kl_divergence(p, p)) <= 1e-12


# --- compare / centroid ---

def test_compare_modes():
    a, b = [1.0, 2.0], [3.0, 5.0]
    np.testing.assert_array_equal(compare(a, b, ComparisonSpec("difference")), [-2.0, -3.0])
    np.testing.assert_array_equal(compare(a, b, ComparisonSpec("addition")), [4.0, 7.0])
    np.testing.assert_allclose(compare([4.0, 0.0], [0.0, 4.0], ComparisonSpec("interpolation"), alpha=0.25),
                               [1.0, 3.0])


def test_compare_difference_is_antisymmetric(np_rng):
    spec = ComparisonSpec("difference")
    a, b = np_rng.normal(size=5), np_rng.normal(size=5)
    np.testing.assert_array_equal(compare(a, b, spec), -compare(b, a, spec))


def test_compare_interpolation_needs_randomness():
    with pytest.raises(InvalidInput):
        compare([1.0], [2.0], ComparisonSpec("interpolation"))
    drawn = compare([1.0, 0.0], [0.0, 1.0], ComparisonSpec("interpolation"), rng=RngStream(3))
    assert drawn.sum() == pytest.approx(1.0)
    assert 0.0 <= drawn[0] <= 1.0


def test_compare_errors():
    with pytest.raises(InvalidInput):
        compare([1.0, 2.0], [1.0], ComparisonSpec("difference"))
    with pytest.raises(InvalidInput):
        ComparisonSpec("subtraction")


def test_centroid_examples():
    np.testing.assert_array_equal(centroid([[0.0, 0.0], [2.0, 4.0]]), [1.0, 2.0])
    np.testing.assert_array_equal(centroid([[5.0, 5.0]]), [5.0, 5.0])
    np.testing.assert_allclose(centroid([[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]]), [1.0, 1.0])
    with pytest.raises(InvalidInput):
        centroid([])


def test_centroid_permutation_invariant(np_rng):
    group = np_rng.normal(size=(5, 4))
    np.testing.assert_allclose(centroid(group), centroid(group[::-1]), atol=1e-15)


# --- pearson / correlation ---

def test_pearson_examples():
    assert pearson([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert pearson([1, 2, 3], [5, 5, 5]) == 0.0
    with pytest.raises(InvalidInput):
        pearson([1.0], [2.0])


def test_correlation_matrix_examples(np_rng):
    col = np_rng.normal(size=6)
    X = np.stack([col, col, -col], axis=1)
    corr = correlation_matrix(X)
    assert corr[0, 1] == pytest.approx(1.0)
    assert corr[0, 2] == pytest.approx(-1.0)

    R = np_rng.normal(size=(3, 3))
    corr = correlation_matrix(R)
    for i in range(3):
        for j in range(3):
            expected = 1.0 if i == j else pearson(R[:, i], R[:, j])
            assert corr[i, j] == pytest.approx(expected, abs=1e-12)


def test_correlation_matrix_properties(np_rng):
    X = np_rng.normal(size=(20, 6))
    X[:, 4] = 2.5
    corr = correlation_matrix(X)
    np.testing.assert_array_equal(corr, corr.T)
    np.testing.assert_array_equal(np.diag(corr), np.ones(6))
    assert np.all(corr[4, np.arange(6) != 4] == 0.0)
    assert np.all(np.abs(corr) <= 1.0)
    with pytest.raises(InvalidInput):
        correlation_matrix(np.ones((1, 3)))


# --- eigen / singular values ---

def test_singular_value_examples():
    u = np.array([3.0, 4.0]) / 5.0
    v = np.array([1.0, 2.0, 2.0]) / 3.0
    np.testing.assert_allclose(singular_values(np.outer(u, v)), [1.0, 0.0], atol=1e-7)
    np.testing.assert_allclose(singular_values(np.eye(3)), [1.0, 1.0, 1.0], atol=1e-12)


def test_singular_values_match_library_svd(np_rng):
    X = np_rng.normal(size=(5, 4))
    np.testing.assert_allclose(singular_values(X), np.linalg.svd(X, compute_uv=False), rtol=1e-6, atol=1e-9)


def test_singular_values_frobenius(np_rng):
    for _ in range(50):
        m, c = np_rng.integers(2, 9, size=2)
        X = np_rng.normal(size=(m, c))
        sigma = singular_values(X)
        assert len(sigma) == min(m, c)
        assert np.all(sigma >= 0)
        assert np.all(np.diff(sigma) <= 0)
        assert np.sum(sigma ** 2) == pytest.approx(np.sum(X ** 2), rel=1e-6)


def test_singular_values_reject_non_finite():
    with pytest.raises(InvalidInput):
        singular_values([[1.0, np.nan], [0.0, 1.0]])


def test_jacobi_eigenvalues_of_symmetric_matrix(np_rng):
    A = np_rng.normal(size=(6, 6))
    G = A + A.T
    np.testing.assert_allclose(np.sort(symmetric_eigenvalues(G)), np.linalg.eigvalsh(G), atol=1e-8)


# --- huber ---

def test_huber_examples():
    assert huber(0.0) == 0.0
    assert huber(0.5, 1.0) == pytest.approx(0.125)
    assert huber(3.0, 1.0) == pytest.approx(2.5)
    assert huber(-3.0, 1.0) == pytest.approx(2.5)


def test_huber_continuous_at_delta():
    for delta in (0.5, 1.0, 2.0):
        assert huber(delta - 1e-9, delta) == pytest.approx(huber(delta + 1e-9, delta), abs=1e-8)
        np.testing.assert_allclose(huber_grad(np.array([delta - 1e-9, delta + 1e-9]), delta),
                                   [delta, delta], atol=1e-8)


# --- rng ---

def test_rng_streams_replay():
    a = RngStream(7).child("budget", 100)
    b = RngStream(7).child("budget", 100)
    np.testing.assert_array_equal(a.normal(size=10), b.normal(size=10))
    c = RngStream(7).child("budget", 200)
    assert not np.array_equal(RngStream(7).child("budget", 100).normal(size=10), c.normal(size=10))


def test_rng_rejects_bad_seeds():
    with pytest.raises(InvalidInput):
        RngStream(-1)
    with pytest.raises(InvalidInput):
        RngStream(1).child(-3)

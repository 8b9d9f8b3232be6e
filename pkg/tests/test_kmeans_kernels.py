import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sedpipe.errors import ConfigError
from sedpipe.learners import (
    chi2_cross,
    chi2_distance,
    chi2_gram,
    combined_gram,
    combined_kernel,
    kmeans_fit,
    mean_chi2,
    rbf_gram,
)


def test_kmeans_k_equals_n_recovers_points(rng):
    X = rng.normal(size=(5, 3))
    cb = kmeans_fit(X, 5, seed=0)
    got = sorted(map(tuple, np.round(cb.centroids, 9)))
    want = sorted(map(tuple, np.round(X, 9)))
    assert got == want


def test_kmeans_two_blobs(rng):
    a = rng.normal(0.0, 0.05, size=(40, 2))
    b = rng.normal(4.0, 0.05, size=(40, 2))
    cb = kmeans_fit(np.vstack([a, b]), 2, seed=3)
    # oracle: exact means of the known assignment
    means = sorted([tuple(a.mean(axis=0)), tuple(b.mean(axis=0))])
    got = sorted(map(tuple, cb.centroids))
    assert np.allclose(got, means, atol=1e-9)


def test_kmeans_deterministic(rng):
    X = rng.normal(size=(60, 4))
    a = kmeans_fit(X, 7, seed=42)
    b = kmeans_fit(X, 7, seed=42)
    assert np.array_equal(a.centroids, b.centroids)


def test_kmeans_too_few_points_raises(rng):
    with pytest.raises(ConfigError):
        kmeans_fit(rng.normal(size=(3, 2)), 4, seed=0)


def test_kmeans_no_duplicate_centroids(rng):
    X = np.repeat(rng.normal(size=(4, 2)), 10, axis=0)
    cb = kmeans_fit(X, 4, seed=5)
    assert len({tuple(c) for c in np.round(cb.centroids, 9)}) == 4


def test_chi2_self_distance_zero():
    u = np.array([0.2, 0.3, 0.5])
    assert chi2_distance(u, u) == 0.0


def test_chi2_hand_value():
    # 1/2 * (1/1 + 1/1) = 1, up to the 1e-12 stabilizer
    assert chi2_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0, abs=2e-12)


def test_chi2_equal_histograms_zero():
    assert chi2_distance([0.5, 0.5], [0.5, 0.5]) == 0.0


def test_chi2_errors():
    with pytest.raises(ValueError):
        chi2_distance([1.0, 0.0], [1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        chi2_distance([-0.1, 1.1], [0.5, 0.5])


def test_chi2_cross_matches_scalar(rng):
    U = rng.uniform(0, 1, size=(4, 6))
    V = rng.uniform(0, 1, size=(3, 6))
    D = chi2_cross(U, V)
    for i in range(4):
        for j in range(3):
            assert D[i, j] == pytest.approx(chi2_distance(U[i], V[j]), abs=1e-14)


def test_combined_kernel_self_is_one(rng):
    u = rng.uniform(0, 1, 5)
    v = rng.uniform(0, 1, 3)
    assert combined_kernel((u, v), (u, v), [0.7, 1.3]) == 1.0


def test_combined_kernel_exp_minus_one_case(rng):
    u1, u2 = rng.uniform(0.1, 1, 6), rng.uniform(0.1, 1, 6)
    d = chi2_distance(u1, u2)
    v = rng.uniform(0.1, 1, 4)
    # one channel at D = A, the other at D = 0
    k = combined_kernel((u1, v), (u2, v), [d, 1.0])
    assert k == pytest.approx(np.exp(-1.0), abs=1e-12)


def test_combined_kernel_symmetric(rng):
    e1 = (rng.uniform(0, 1, 5), rng.uniform(0, 1, 3))
    e2 = (rng.uniform(0, 1, 5), rng.uniform(0, 1, 3))
    assert combined_kernel(e1, e2, [0.5, 0.5]) == combined_kernel(e2, e1, [0.5, 0.5])


def test_combined_kernel_rejects_nonpositive_bandwidth(rng):
    u = rng.uniform(0, 1, 3)
    with pytest.raises(ValueError):
        combined_kernel((u,), (u,), [0.0])


def test_mean_chi2_is_pairwise_mean(rng):
    X = rng.uniform(0, 1, size=(6, 4))
    vals = [chi2_distance(X[i], X[j]) for i in range(6) for j in range(i + 1, 6)]
    assert mean_chi2(X) == pytest.approx(np.mean(vals), abs=1e-12)


@pytest.mark.parametrize("which", ["rbf", "chi2", "combined"])
def test_gram_psd_unit_diagonal(which, rng):
    for trial in range(5):
        n = int(rng.integers(3, 21))
        if which == "rbf":
            X = rng.normal(size=(n, 5))
            K = rbf_gram(X, X, gamma=0.3)
        elif which == "chi2":
            X = rng.uniform(0, 1, size=(n, 5))
            K = chi2_gram(X, X, a=mean_chi2(X) or 1.0)
        else:
            U = rng.uniform(0, 1, size=(n, 5))
            V = rng.uniform(0, 1, size=(n, 3))
            K = combined_gram([U, V], [U, V], [mean_chi2(U) or 1.0, mean_chi2(V) or 1.0])
        assert np.allclose(np.diag(K), 1.0)
        assert np.allclose(K, K.T, atol=1e-12)
        assert np.linalg.eigvalsh(K).min() >= -1e-8


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(0.0, 10.0), min_size=1, max_size=8),
    st.lists(st.floats(0.0, 10.0), min_size=1, max_size=8),
)
def test_chi2_nonnegative_and_symmetric(u, v):
    n = min(len(u), len(v))
    u, v = np.array(u[:n]), np.array(v[:n])
    d = chi2_distance(u, v)
    assert d >= 0.0
    assert d == chi2_distance(v, u)

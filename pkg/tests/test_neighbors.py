import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hope_embed.neighbors import (
    ASYMMETRIC,
    SYMMETRIC,
    p_from_labels,
    pairwise_sq_dist,
    q_asymmetric,
    q_symmetric,
)


def loop_sq_dist(Y):
    n = len(Y)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            D[i, j] = sum((a - b) ** 2 for a, b in zip(Y[i], Y[j]))
    return D


def test_identical_rows_give_zero_distances():
    assert not np.any(pairwise_sq_dist(np.tile([1.5, -2.0], (4, 1))))


def test_three_four_five():
    D = pairwise_sq_dist(np.array([[0.0, 0.0], [3.0, 4.0]]))
    assert D[0, 1] == 25.0 and D[1, 0] == 25.0


def test_distances_match_double_loop(rng):
    Y = rng.normal(size=(12, 3))
    D = pairwise_sq_dist(Y)
    ref = loop_sq_dist(Y)
    np.testing.assert_allclose(D, ref, rtol=1e-12, atol=1e-14)
    assert np.all(np.diag(D) == 0) and np.array_equal(D, D.T)


def test_cross_distances(rng):
    Y, Z = rng.normal(size=(4, 2)), rng.normal(size=(3, 2))
    D = pairwise_sq_dist(Y, Z)
    assert D.shape == (4, 3)
    assert D[2, 1] == pytest.approx(np.sum((Y[2] - Z[1]) ** 2), rel=1e-14)


def test_q_symmetric_examples():
    q = q_symmetric(np.zeros((2, 2)))
    np.testing.assert_array_equal(q, [[0, 0.5], [0.5, 0]])
    q = q_symmetric(3.0 * (1 - np.eye(3)))
    np.testing.assert_allclose(q[~np.eye(3, dtype=bool)], 1 / 6, rtol=1e-15)
    D = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
    assert q_symmetric(D)[0, 1] == pytest.approx(0.25, rel=1e-15)


def test_q_symmetric_needs_two_points():
    with pytest.raises(ValueError):
        q_symmetric(np.zeros((1, 1)))


def test_q_asymmetric_examples():
    np.testing.assert_array_equal(q_asymmetric(np.array([[4.0], [0.0]])), [[1.0], [1.0]])
    np.testing.assert_allclose(q_asymmetric(np.full((2, 4), 2.0)), 0.25, rtol=1e-15)
    np.testing.assert_allclose(q_asymmetric(np.array([[0.0, 1.0]])), [[2 / 3, 1 / 3]], rtol=1e-15)


def test_p_examples():
    p = p_from_labels(np.array([1, 1, 2, 2]), SYMMETRIC)
    expected = np.array([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]) / 4
    np.testing.assert_array_equal(p, expected)
    p = p_from_labels(np.array([1, 2]), ASYMMETRIC, np.array([1, 1, 2, 2]))
    np.testing.assert_array_equal(p, [[0.5, 0.5, 0, 0], [0, 0, 0.5, 0.5]])
    p = p_from_labels(np.array([1, 2]), ASYMMETRIC, np.array([1, 1, 2]))
    np.testing.assert_array_equal(p, [[0.5, 0.5, 0], [0, 0, 1]])


def test_p_errors():
    with pytest.raises(ValueError, match="exemplar"):
        p_from_labels(np.array([1, 2, 3]), ASYMMETRIC, np.array([1, 2]))
    with pytest.raises(ValueError, match="same-class"):
        p_from_labels(np.array([1, 2, 3]), SYMMETRIC)
    with pytest.raises(ValueError):
        p_from_labels(np.array([1, 2]), ASYMMETRIC)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 15), z=st.integers(1, 6),
       scale=st.floats(1e-3, 1e3))
def test_normalization_properties(seed, n, z, scale):
    rng = np.random.default_rng(seed)
    Y = scale * rng.normal(size=(n, 2))
    q = q_symmetric(pairwise_sq_dist(Y))
    assert abs(q.sum() - 1) < 1e-12
    np.testing.assert_allclose(q, q.T, rtol=1e-14, atol=0)
    assert np.all(np.diag(q) == 0) and np.all((q >= 0) & (q <= 1))
    qa = q_asymmetric(pairwise_sq_dist(Y, scale * rng.normal(size=(z, 2))))
    assert np.max(np.abs(qa.sum(axis=1) - 1)) < 1e-12
    labels = rng.integers(1, 3, size=n)
    if np.any(np.bincount(labels) >= 2):
        assert abs(p_from_labels(labels).sum() - 1) < 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), bump=st.floats(1e-3, 10.0))
def test_increasing_a_distance_lowers_its_probability(seed, bump):
    rng = np.random.default_rng(seed)
    D = pairwise_sq_dist(rng.normal(size=(5, 2)))
    D2 = D.copy()
    D2[1, 3] += bump
    D2[3, 1] += bump
    assert q_symmetric(D2)[1, 3] < q_symmetric(D)[1, 3]
    Da = rng.uniform(0, 4, size=(3, 4))
    Db = Da.copy()
    Db[0, 2] += bump
    assert q_asymmetric(Db)[0, 2] < q_asymmetric(Da)[0, 2]

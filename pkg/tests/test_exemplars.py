import numpy as np
import pytest

from hope_embed.data import DataError, LabeledDataset, make_synthetic
from hope_embed.exemplars import (
    EMBEDDING,
    ExemplarSet,
    kmeans,
    kmeans_exemplars,
    kmeans_plusplus,
    lloyd,
)
from hope_embed.model import init_model

from helpers import random_points, with_bias


def test_single_exemplar_is_class_mean(rng):
    data = LabeledDataset(random_points(rng, 30, 4), np.repeat([1, 2, 3], 10), 3)
    ex = kmeans_exemplars(data, 1)
    for c in (1, 2, 3):
        np.testing.assert_allclose(ex.E[ex.labels == c][0], data.X[data.labels == c].mean(axis=0),
                                   rtol=1e-13)
    assert np.all(ex.E[:, -1] == 1.0)


def test_two_subclusters_get_one_exemplar_each(rng):
    feats, labels, boxes = [], [], []
    for c, base in enumerate([(0, 0), (100, 0)], 1):
        for shift in (0.0, 30.0):
            pts = rng.uniform(size=(15, 2)) + np.array(base) + [0.0, shift]
            feats.append(pts)
            labels += [c] * 15
            boxes.append((c, pts.min(axis=0), pts.max(axis=0)))
    data = LabeledDataset(with_bias(np.vstack(feats)), np.array(labels), 2)
    ex = kmeans_exemplars(data, 2, seed=4)
    for c, lo, hi in boxes:
        inside = [np.all((e[:2] >= lo) & (e[:2] <= hi)) for e in ex.E[ex.labels == c]]
        assert sum(inside) == 1


def test_lloyd_objective_non_increasing(rng):
    X = rng.normal(size=(200, 3))
    _, _, history = lloyd(X, kmeans_plusplus(X, 6, rng))
    assert len(history) >= 2
    assert all(b <= a + 1e-9 * a for a, b in zip(history, history[1:]))


def test_empty_cluster_is_refilled():
    X = np.array([[0.0], [0.1], [10.0], [10.1]])
    centers, assign, _ = lloyd(X, np.array([[0.0], [5.0], [100.0]]))
    assert set(assign.tolist()) == {0, 1, 2}


def test_kmeans_deterministic(rng):
    X = rng.normal(size=(80, 2))
    a, b = kmeans(X, 4, seed=9), kmeans(X, 4, seed=9)
    assert np.array_equal(a[0], b[0])


def test_small_class_error_names_class(rng):
    data = LabeledDataset(random_points(rng, 5, 3), np.array([1, 1, 1, 1, 2]), 2, ["cat", "dog"])
    with pytest.raises(DataError, match="class dog has 1 member"):
        kmeans_exemplars(data, 2)


def test_exemplar_set_invariants():
    with pytest.raises(ValueError, match="bias"):
        ExemplarSet(np.zeros((2, 3)), np.array([1, 2]), 1)
    with pytest.raises(ValueError, match="exactly 2"):
        ExemplarSet(with_bias(np.zeros((3, 2))), np.array([1, 1, 2]), 2)


def test_embedding_space_returns_training_inputs():
    data = make_synthetic("gaussians", 0, n_per_class=20, num_classes=2, dim=3)
    model = init_model("hope", 1, data.input_dim, 2, 3)
    ex = kmeans_exemplars(data, 2, seed=1, space=EMBEDDING, model=model)
    for e, c in zip(ex.E, ex.labels):
        rows = data.X[data.labels == c]
        assert np.any(np.all(rows == e, axis=1))
    with pytest.raises(ValueError):
        kmeans_exemplars(data, 2, space=EMBEDDING)


def test_labels_and_counts(rng):
    data = make_synthetic("gaussians", 2, n_per_class=12, num_classes=4, dim=3)
    ex = kmeans_exemplars(data, 3, seed=2)
    assert ex.size == 12 and ex.per_class == 3
    assert np.array_equal(ex.labels, np.repeat([1, 2, 3, 4], 3))

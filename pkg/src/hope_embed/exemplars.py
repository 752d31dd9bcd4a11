"""Exemplar sets and their supervised k-means initialization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DataError
from .model import embed

INPUT = "input"
EMBEDDING = "embedding"


@dataclass
class ExemplarSet:
    """``z`` synthetic inputs (``z x H``, bias column 1) with fixed class labels."""

    E: np.ndarray
    labels: np.ndarray
    per_class: int

    def __post_init__(self):
        self.E = np.asarray(self.E, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.E.shape[0] != self.labels.shape[0]:
            raise ValueError(f"{self.E.shape[0]} exemplars but {self.labels.shape[0]} labels")
        if not np.all(self.E[:, -1] == 1.0):
            raise ValueError("exemplar bias components must equal 1")
        _, counts = np.unique(self.labels, return_counts=True)
        if np.any(counts != self.per_class):
            raise ValueError(f"every class needs exactly {self.per_class} exemplars, got counts {counts.tolist()}")

    @property
    def size(self) -> int:
        return self.E.shape[0]

    def copy(self) -> "ExemplarSet":
        return ExemplarSet(self.E.copy(), self.labels.copy(), self.per_class)


def within_ss(X, centers, assign):
    return float(np.sum((X - centers[assign]) ** 2))


def _sq_dists(X, centers):
    diff = X[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def kmeans_plusplus(X, k, rng):
    """k-means++ seeding: each new centre drawn with probability proportional to D^2."""
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    closest = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=closest / total)
        centers.append(X[idx])
        closest = np.minimum(closest, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers)


def lloyd(X, centers, max_iter=100, tol=1e-6):
    """Lloyd iterations from the given centres.

    Returns ``(centers, assign, history)`` where ``history`` lists the
    within-cluster sum of squares after every assignment step. An empty
    cluster takes over the point farthest from its current centre.
    """
    centers = np.array(centers, dtype=np.float64)
    k = centers.shape[0]
    history = []
    assign = np.zeros(X.shape[0], dtype=np.int64)
    for _ in range(max_iter):
        d = _sq_dists(X, centers)
        assign = np.argmin(d, axis=1)
        for j in range(k):
            if not np.any(assign == j):
                spread = d[np.arange(X.shape[0]), assign].copy()
                # never strip the only member of another cluster
                spread[np.bincount(assign, minlength=k)[assign] < 2] = -1.0
                far = int(np.argmax(spread))
                assign[far] = j
                d[far, j] = 0.0
        history.append(within_ss(X, centers, assign))
        new = np.array([X[assign == j].mean(axis=0) for j in range(k)])
        shift = np.max(np.linalg.norm(new - centers, axis=1))
        centers = new
        if shift <= tol:
            break
    assign = np.argmin(_sq_dists(X, centers), axis=1)
    history.append(within_ss(X, centers, assign))
    return centers, assign, history


def kmeans(X, k, seed=0, restarts=5, max_iter=100, tol=1e-6):
    """Best of ``restarts`` seeded k-means++/Lloyd runs by within-cluster SS."""
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        centers, assign, history = lloyd(X, kmeans_plusplus(X, k, rng), max_iter, tol)
        if best is None or history[-1] < best[2][-1]:
            best = (centers, assign, history)
    return best


def kmeans_exemplars(data, per_class, seed=0, space=INPUT, model=None, restarts=5):
    """Run k-means with ``k = per_class`` inside every class.

    ``space=INPUT`` returns the input-space centroids (bias reset to 1).
    ``space=EMBEDDING`` clusters the embedded points and returns, for each
    cluster, the training input whose embedding lies closest to the centroid.
    """
    if space not in (INPUT, EMBEDDING):
        raise ValueError(f"unknown k-means space {space!r}")
    if space == EMBEDDING and model is None:
        raise ValueError("k-means in embedding space needs a trained model")
    counts = data.class_counts()
    for c, count in enumerate(counts, 1):
        if count < per_class:
            raise DataError(
                f"class {data.label_values[c - 1]} has {count} member(s), fewer than {per_class} exemplars"
            )
    Y = embed(model, data.X) if space == EMBEDDING else None
    rows, labels = [], []
    for c in range(1, data.num_classes + 1):
        members = np.flatnonzero(data.labels == c)
        class_seed = np.random.SeedSequence([seed, c])
        if space == INPUT:
            centers, _, _ = kmeans(data.X[members, :-1], per_class, class_seed, restarts)
            rows.append(np.hstack([centers, np.ones((per_class, 1))]))
        else:
            centers, _, _ = kmeans(Y[members], per_class, class_seed, restarts)
            nearest = np.argmin(_sq_dists(centers, Y[members]), axis=1)
            rows.append(data.X[members[nearest]])
        labels.append(np.full(per_class, c))
    return ExemplarSet(np.vstack(rows), np.concatenate(labels), per_class)


def optimize_exemplars(model, data, init: ExemplarSet, config=None, validation=None) -> ExemplarSet:
    """Refine exemplars jointly with the model; returns only the exemplars.

    Labels and bias components are left untouched.
    """
    from .optimizer import train_joint

    _, ex, _ = train_joint(model, data, init, config, validation)
    return ex

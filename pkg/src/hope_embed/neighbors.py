"""Stochastic neighbour probabilities under a heavy-tailed t-kernel.

Two forms are supported:

* symmetric: every ordered pair ``(i, j)``, ``i != j``, of one point set, with a
  single normalizer shared by the whole table;
* asymmetric: points against a separate exemplar set, normalized per row.

Target tables built from labels follow the same normalization as the model
tables so that the KL divergence between them is well defined.
"""

import numpy as np

SYMMETRIC = "symmetric"
ASYMMETRIC = "asymmetric"


def pairwise_sq_dist(Y, Z=None):
    """Squared Euclidean distances between rows of ``Y`` (and ``Z`` if given).

    Computed from coordinate differences, not the ``|a|^2 + |b|^2 - 2ab``
    expansion, so coincident points give exactly zero.
    """
    Y = np.asarray(Y, dtype=np.float64)
    Z = Y if Z is None else np.asarray(Z, dtype=np.float64)
    diff = Y[:, None, :] - Z[None, :, :]
    return np.maximum(np.einsum("ijk,ijk->ij", diff, diff), 0.0)


def t_kernel(D):
    return 1.0 / (1.0 + D)


def q_symmetric(D):
    """Model probabilities over ordered pairs with one global normalizer."""
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    if n < 2:
        raise ValueError("symmetric probabilities need at least two points")
    K = t_kernel(D)
    np.fill_diagonal(K, 0.0)
    return K / K.sum()


def q_asymmetric(D):
    """Model probabilities of each point choosing each exemplar, rows sum to 1."""
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[1] < 1:
        raise ValueError("asymmetric probabilities need at least one exemplar")
    K = t_kernel(D)
    return K / K.sum(axis=1, keepdims=True)


def same_class_mask(labels, other_labels=None):
    labels = np.asarray(labels)
    other = labels if other_labels is None else np.asarray(other_labels)
    return labels[:, None] == other[None, :]


def p_from_labels(labels, form=SYMMETRIC, exemplar_labels=None):
    """Label-derived target probabilities.

    Symmetric: uniform over all same-class ordered pairs of distinct points.
    Asymmetric: each row uniform over the exemplars sharing that point's label.
    """
    if form == SYMMETRIC:
        mask = same_class_mask(labels).astype(np.float64)
        np.fill_diagonal(mask, 0.0)
        total = mask.sum()
        if total == 0:
            raise ValueError("no same-class pairs: every class has a single member")
        return mask / total
    if form == ASYMMETRIC:
        if exemplar_labels is None:
            raise ValueError("asymmetric targets need exemplar labels")
        mask = same_class_mask(labels, exemplar_labels).astype(np.float64)
        counts = mask.sum(axis=1, keepdims=True)
        missing = sorted(set(np.asarray(labels)[counts[:, 0] == 0].tolist()))
        if missing:
            raise ValueError(f"classes without exemplars: {missing}")
        return mask / counts
    raise ValueError(f"unknown form {form!r}")

"""Class-collapsing KL objective and its exact gradients.

The loss is the full divergence ``KL(p || q) = sum p log(p / q)`` over the
entries where ``p > 0``; the ``sum p log p`` constant is kept so the value is
nonnegative. For both table forms the derivative with respect to a squared
distance is ``(p_ij - q_ij) / (1 + d_ij)`` because every ``p`` table sums to
one over each normalizer's support.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .model import embed, grad_embed
from .neighbors import (
    ASYMMETRIC,
    SYMMETRIC,
    p_from_labels,
    pairwise_sq_dist,
    q_asymmetric,
    q_symmetric,
    t_kernel,
)

log = logging.getLogger(__name__)


@dataclass
class LossReport:
    loss: float
    grad_norm: float
    num_terms: int


@dataclass
class ProbabilityTables:
    form: str
    q: np.ndarray
    p: np.ndarray
    d: np.ndarray


def kl_divergence(p, q):
    mask = p > 0
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))


def _warn_singletons(labels):
    _, counts = np.unique(labels, return_counts=True)
    if np.any(counts == 1):
        log.warning("%d class(es) have a single member and contribute no same-class pair",
                    int(np.sum(counts == 1)))


def symmetric_tables(Y, labels) -> ProbabilityTables:
    D = pairwise_sq_dist(Y)
    return ProbabilityTables(SYMMETRIC, q_symmetric(D), p_from_labels(labels, SYMMETRIC), D)


def asymmetric_tables(Y, labels, V, exemplar_labels) -> ProbabilityTables:
    D = pairwise_sq_dist(Y, V)
    return ProbabilityTables(
        ASYMMETRIC, q_asymmetric(D), p_from_labels(labels, ASYMMETRIC, exemplar_labels), D
    )


def symmetric_loss_from_embedding(Y, labels):
    """Loss and ``dloss/dY`` for an embedding fed directly (no map)."""
    t = symmetric_tables(Y, labels)
    M = (t.p - t.q) * t_kernel(t.d)
    np.fill_diagonal(M, 0.0)
    S = M + M.T
    gY = 2.0 * (S.sum(axis=1)[:, None] * Y - S @ Y)
    return kl_divergence(t.p, t.q), gY


def asymmetric_loss_from_embedding(Y, labels, V, exemplar_labels):
    """Loss with gradients for point embeddings ``Y`` and exemplar embeddings ``V``."""
    t = asymmetric_tables(Y, labels, V, exemplar_labels)
    M = (t.p - t.q) * t_kernel(t.d)
    rows = M.sum(axis=1)
    cols = M.sum(axis=0)
    gY = 2.0 * (rows[:, None] * Y - M @ V)
    gV = 2.0 * (cols[:, None] * V - M.T @ Y)
    return kl_divergence(t.p, t.q), gY, gV


def loss_symmetric(model, data) -> LossReport:
    loss, grads = grad_symmetric(model, data, with_loss=True)
    norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    n = data.X.shape[0]
    return LossReport(loss, norm, n * (n - 1))


def grad_symmetric(model, data, with_loss=False):
    """Gradients of the symmetric loss for every model parameter (dict by name)."""
    if data.X.shape[0] < 2:
        raise ValueError("the symmetric objective needs at least two points")
    _warn_singletons(data.labels)
    Y = embed(model, data.X, exact_rows=False)
    loss, gY = symmetric_loss_from_embedding(Y, data.labels)
    grads = grad_embed(model, data.X, gY).params
    return (loss, grads) if with_loss else grads


def symmetric_value_and_grad(model, X, labels):
    """Flat-vector form used by the optimizer; ``labels`` must contain a same-class pair."""
    Y = embed(model, X, exact_rows=False)
    loss, gY = symmetric_loss_from_embedding(Y, labels)
    return loss, grad_embed(model, X, gY).flat(model)


def asymmetric_value_and_grad(model, X, labels, E, exemplar_labels):
    """Loss, flat parameter gradient and the ``z x H`` exemplar gradient.

    The exemplar bias column is frozen at 1, so its gradient is zeroed.
    """
    Y = embed(model, X, exact_rows=False)
    V = embed(model, E, exact_rows=False)
    loss, gY, gV = asymmetric_loss_from_embedding(Y, labels, V, exemplar_labels)
    gx = grad_embed(model, X, gY)
    ge = grad_embed(model, E, gV)
    gparams = gx.flat(model) + ge.flat(model)
    gE = ge.inputs.copy()
    gE[:, -1] = 0.0
    return loss, gparams, gE


def loss_asymmetric(model, data, exemplars) -> LossReport:
    loss, gp, gE = asymmetric_value_and_grad(model, data.X, data.labels, exemplars.E, exemplars.labels)
    norm = float(np.sqrt(gp @ gp + np.sum(gE * gE)))
    return LossReport(loss, norm, data.X.shape[0])


def grad_asymmetric(model, data, exemplars):
    """Parameter gradients (dict by name) and exemplar gradients (``z x H``)."""
    Y = embed(model, data.X, exact_rows=False)
    V = embed(model, exemplars.E, exact_rows=False)
    _, gY, gV = asymmetric_loss_from_embedding(Y, data.labels, V, exemplars.labels)
    gx = grad_embed(model, data.X, gY)
    ge = grad_embed(model, exemplars.E, gV)
    params = {name: gx.params[name] + ge.params[name] for name in model.param_names()}
    gE = ge.inputs.copy()
    gE[:, -1] = 0.0
    return params, gE

"""High-order parametric embedding maps (HOPE and sigmoid HOPE).

Both variants embed O-order feature interactions through a tied factorization:
every factor ``f`` contributes the unit ``(C_f . x) ** O``. HOPE projects those
units linearly to the embedding space; S-HOPE passes weighted sums of them
through sigmoid units first::

    HOPE:    y_s = sum_f P[f, s] * (C_f . x) ** O
    S-HOPE:  y_s = sum_k P[s, k] * sigmoid(sum_f W[f, k] * (C_f . x) ** O + b[k])

Inputs carry a trailing bias component fixed to 1.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

HOPE = "hope"
SHOPE = "shope"
VARIANTS = (HOPE, SHOPE)

SIGMOID_CLAMP = 30.0
ORACLE_MAX_TERMS = 10**6


def sigmoid(t):
    """Logistic function with its argument clamped to [-30, 30]."""
    return 1.0 / (1.0 + np.exp(-np.clip(t, -SIGMOID_CLAMP, SIGMOID_CLAMP)))


def int_power(a, order):
    """``a ** order`` by repeated multiplication (exact sign handling for odd orders)."""
    out = a.copy()
    for _ in range(order - 1):
        out = out * a
    return out


@dataclass
class HighOrderModel:
    """Parameters of a HOPE or S-HOPE embedding function.

    ``C`` is ``F x H``. For HOPE ``P`` is ``F x h`` and ``W``/``b`` are None;
    for S-HOPE ``P`` is ``h x m``, ``W`` is ``F x m`` and ``b`` has length ``m``.
    ``preprocessing`` records how raw inputs were turned into model inputs
    (scaling scheme, label alphabet) so inference can reproduce it.
    """

    variant: str
    order: int
    C: np.ndarray
    P: np.ndarray
    W: np.ndarray | None = None
    b: np.ndarray | None = None
    preprocessing: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if int(self.order) < 1:
            raise ValueError(f"order must be a positive integer, got {self.order}")
        self.order = int(self.order)
        self.C = np.asarray(self.C, dtype=np.float64)
        self.P = np.asarray(self.P, dtype=np.float64)
        F = self.C.shape[0]
        if self.variant == HOPE:
            if self.W is not None or self.b is not None:
                raise ValueError("HOPE models carry no sigmoid weights or biases")
            if self.P.ndim != 2 or self.P.shape[0] != F:
                raise ValueError(f"HOPE projection must be F x h with F={F}, got {self.P.shape}")
        else:
            if self.W is None or self.b is None:
                raise ValueError("S-HOPE models need sigmoid weights W and biases b")
            self.W = np.asarray(self.W, dtype=np.float64)
            self.b = np.asarray(self.b, dtype=np.float64)
            m = self.b.shape[0]
            if self.W.shape != (F, m):
                raise ValueError(f"W must be F x m = {(F, m)}, got {self.W.shape}")
            if self.P.ndim != 2 or self.P.shape[1] != m:
                raise ValueError(f"S-HOPE projection must be h x m with m={m}, got {self.P.shape}")

    @property
    def num_factors(self) -> int:
        return self.C.shape[0]

    @property
    def input_dim(self) -> int:
        return self.C.shape[1]

    @property
    def embed_dim(self) -> int:
        return self.P.shape[1] if self.variant == HOPE else self.P.shape[0]

    @property
    def num_units(self) -> int:
        return 0 if self.variant == HOPE else self.b.shape[0]

    def param_names(self):
        return ("C", "P") if self.variant == HOPE else ("C", "W", "b", "P")

    def params(self) -> dict:
        return {name: getattr(self, name) for name in self.param_names()}

    def get_flat(self) -> np.ndarray:
        return np.concatenate([getattr(self, n).ravel() for n in self.param_names()])

    def set_flat(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        pos = 0
        for name in self.param_names():
            arr = getattr(self, name)
            setattr(self, name, vec[pos:pos + arr.size].reshape(arr.shape).copy())
            pos += arr.size
        if pos != vec.size:
            raise ValueError(f"flat parameter vector has {vec.size} entries, expected {pos}")

    @property
    def num_params(self) -> int:
        return sum(getattr(self, n).size for n in self.param_names())

    def copy(self) -> "HighOrderModel":
        return HighOrderModel(
            self.variant, self.order, self.C.copy(), self.P.copy(),
            None if self.W is None else self.W.copy(),
            None if self.b is None else self.b.copy(),
            dict(self.preprocessing),
        )

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.params().values())

    def param_norms(self) -> dict:
        return {n: float(np.linalg.norm(a)) for n, a in self.params().items()}


def init_model(variant, order, input_dim, embed_dim=2, num_factors=100, num_units=100, seed=0):
    """Draw a model with Glorot-uniform weights and zero sigmoid biases."""
    rng = np.random.default_rng(seed)

    def glorot(fan_in, fan_out, shape):
        r = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-r, r, size=shape)

    C = glorot(input_dim, num_factors, (num_factors, input_dim))
    if variant == HOPE:
        P = glorot(num_factors, embed_dim, (num_factors, embed_dim))
        return HighOrderModel(HOPE, order, C, P)
    if variant == SHOPE:
        W = glorot(num_factors, num_units, (num_factors, num_units))
        P = glorot(num_units, embed_dim, (embed_dim, num_units))
        return HighOrderModel(SHOPE, order, C, P, W, np.zeros(num_units))
    raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


def _check_inputs(model, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D input batch, got shape {X.shape}")
    if X.shape[1] != model.input_dim:
        raise ValueError(
            f"input dimension mismatch: model expects length {model.input_dim}, got {X.shape[1]}"
        )
    return X


def _rowwise(A, B):
    """``A @ B`` computed as one identical vector-matrix product per row of ``A``."""
    return (A[:, None, :] @ B)[:, 0, :]


def _forward(model, X, rowwise=False):
    """Batched forward pass returning the embedding and the cached intermediates."""
    mm = _rowwise if rowwise else np.matmul
    A = mm(X, model.C.T)
    U = int_power(A, model.order)
    if model.variant == HOPE:
        return mm(U, model.P), (A, U, None, None)
    Z = mm(U, model.W) + model.b
    S = sigmoid(Z)
    return mm(S, model.P.T), (A, U, Z, S)


def embed(model, X, exact_rows=True):
    """Map an ``n x H`` batch to ``n x h`` embeddings.

    With ``exact_rows`` every row goes through the same vector-matrix
    products as a single-point call, so ``embed(model, X)[i]`` equals
    ``map_point(model, X[i])`` bit for bit whatever the batch size. Training
    passes ``exact_rows=False`` to use one matrix-matrix product per layer,
    which is faster but may round differently from the per-row path.
    """
    return _forward(model, _check_inputs(model, X), rowwise=exact_rows)[0]


def map_point(model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a single input vector, got shape {x.shape}")
    return embed(model, x[None, :])[0]


def map_hope(model, x):
    if model.variant != HOPE:
        raise ValueError("map_hope requires a HOPE model")
    return map_point(model, x)


def map_shope(model, x):
    if model.variant != SHOPE:
        raise ValueError("map_shope requires an S-HOPE model")
    return map_point(model, x)


def map_explicit_oracle(model, x, max_terms=ORACLE_MAX_TERMS):
    """Reference HOPE map that enumerates every O-fold feature product.

    Builds the full interaction tensor ``T[i1..iO, s] = sum_f C[f,i1]...C[f,iO] P[f,s]``
    and contracts it against the explicit products ``x[i1]...x[iO]``.
    Only usable for tiny problems; the model functions never call it.
    """
    if model.variant != HOPE:
        raise ValueError("the explicit oracle only covers HOPE models")
    x = np.asarray(x, dtype=np.float64)
    H, O = model.input_dim, model.order
    if x.shape != (H,):
        raise ValueError(f"input dimension mismatch: model expects length {H}, got {x.shape}")
    terms = H**O
    if terms > max_terms:
        raise ValueError(f"explicit enumeration needs H**O = {terms} terms, limit is {max_terms}")
    y = np.zeros(model.embed_dim)
    for idx in itertools.product(range(H), repeat=O):
        feature = 1.0
        for i in idx:
            feature *= x[i]
        coeff = np.ones(model.num_factors)
        for i in idx:
            coeff = coeff * model.C[:, i]
        y += feature * (coeff @ model.P)
    return y


@dataclass
class MapGradient:
    """Gradients of ``sum(upstream * embed(model, X))``."""

    params: dict
    inputs: np.ndarray

    def flat(self, model) -> np.ndarray:
        return np.concatenate([self.params[n].ravel() for n in model.param_names()])


def grad_embed(model, X, upstream) -> MapGradient:
    """Reverse-mode gradient of ``sum(upstream * embed(model, X))``.

    ``upstream`` is ``n x h``; the result holds one array per parameter and the
    ``n x H`` gradient with respect to the inputs.
    """
    X = _check_inputs(model, X)
    G = np.asarray(upstream, dtype=np.float64)
    if G.shape != (X.shape[0], model.embed_dim):
        raise ValueError(f"upstream must be {(X.shape[0], model.embed_dim)}, got {G.shape}")
    _, (A, U, Z, S) = _forward(model, X)
    O = model.order
    grads = {}
    if model.variant == HOPE:
        grads["P"] = U.T @ G
        dU = G @ model.P.T
    else:
        grads["P"] = G.T @ S
        dS = G @ model.P
        # clamped region of the sigmoid has zero slope
        dZ = dS * S * (1.0 - S) * (np.abs(Z) < SIGMOID_CLAMP)
        grads["W"] = U.T @ dZ
        grads["b"] = dZ.sum(axis=0)
        dU = dZ @ model.W.T
    dA = dU * (O * int_power(A, O - 1)) if O > 1 else dU
    grads["C"] = dA.T @ X
    return MapGradient(grads, dA @ model.C)


def grad_map(model, x, upstream) -> MapGradient:
    """Single-point form of :func:`grad_embed`; the input gradient has length H."""
    x = np.asarray(x, dtype=np.float64)
    g = grad_embed(model, x[None, :], np.asarray(upstream, dtype=np.float64)[None, :])
    return MapGradient(g.params, g.inputs[0])

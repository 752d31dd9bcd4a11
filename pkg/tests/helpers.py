"""Numerical helpers shared by the test modules."""

import numpy as np

from hope_embed.model import init_model


def central_diff(f, v, h=1e-6):
    """Central-difference gradient of scalar ``f`` at flat vector ``v``."""
    v = np.asarray(v, dtype=np.float64)
    g = np.zeros_like(v)
    for i in range(v.size):
        e = np.zeros_like(v)
        e[i] = h
        g[i] = (f(v + e) - f(v - e)) / (2 * h)
    return g


def central_diff4(f, v, h=1e-4):
    """Fourth-order central differences; truncation error O(h^4) allows a
    larger step, so rounding noise stays small even when the gradient is tiny
    next to the function value."""
    v = np.asarray(v, dtype=np.float64)
    g = np.zeros_like(v)
    for i in range(v.size):
        e = np.zeros_like(v)
        e[i] = h
        g[i] = (8 * (f(v + e) - f(v - e)) - (f(v + 2 * e) - f(v - 2 * e))) / (12 * h)
    return g


def rel_err(a, b):
    """Largest absolute deviation relative to the largest reference magnitude."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    scale = max(np.abs(b).max(), np.abs(a).max(), 1e-300)
    return float(np.abs(a - b).max() / scale)


def with_bias(Z):
    Z = np.atleast_2d(Z)
    return np.hstack([Z, np.ones((Z.shape[0], 1))])


def random_model(rng, variant, H, O, F, h=2, m=3, scale=1.0):
    model = init_model(variant, O, H, h, F, m, seed=int(rng.integers(2**32)))
    model.C = model.C * scale
    if variant == "shope":
        model.b = rng.normal(size=m)
    return model


def random_points(rng, n, H, spread=1.0):
    return with_bias(spread * rng.normal(size=(n, H - 1)))


GAUSS_PARAMS = dict(n_per_class=100, num_classes=3, dim=5, std=1.0, separation=3.0,
                    subclusters=2, subcluster_spread=2.0)
CIRCLE_PARAMS = dict(n_per_class=200, radii=(1.0, 1.03), noise=0.003)


def knn_oracle(queries, refs, ref_labels, k):
    """Brute-force kNN: sort (distance, index) pairs, vote, break ties by summed
    distance and then by the rank of each class's nearest member."""
    out = []
    for q in queries:
        order = sorted((sum((a - b) ** 2 for a, b in zip(q, r)), j) for j, r in enumerate(refs))[:k]
        stats = {}
        for rank, (d, j) in enumerate(order):
            count, total, first = stats.get(ref_labels[j], (0, 0.0, rank))
            stats[ref_labels[j]] = (count + 1, total + d, first)
        out.append(min(stats, key=lambda c: (-stats[c][0], stats[c][1], stats[c][2])))
    return np.array(out)


ACCEPTANCE_LINES = []


def verdict(number, name, ok, detail):
    """Record (and print) one acceptance line, then fail the test if needed."""
    line = f"criterion {number} {'PASS' if ok else 'FAIL'} {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line

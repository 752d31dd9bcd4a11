"""Figure emitters: embedding scatter plots, training curves, exemplar image grids.

SVG output is made reproducible by fixing the SVG hash salt and dropping the
date metadata, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# Ten fixed colours, cycled for more than ten classes.
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#000080",
)
EXEMPLAR_COLOR = "#d62728"

STYLE = {
    "svg.hashsalt": "hope-embed",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.linewidth": 0.8,
    "legend.frameon": False,
}


def class_color(c: int) -> str:
    return PALETTE[(c - 1) % len(PALETTE)]


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def scatter_svg(path, Y, labels, exemplar_Y=None, label_names=None, title=None):
    """2-D scatter: filled dots per class, exemplars as red empty circles on top.

    Data markers for class ``c`` are grouped under SVG id ``data-class-<c>``;
    exemplar markers under ``exemplars``.
    """
    Y = np.asarray(Y, dtype=np.float64)
    labels = np.asarray(labels)
    if Y.ndim != 2 or Y.shape[1] != 2:
        raise ValueError(f"scatter plots need 2-D embeddings, got dimension {Y.shape[-1]}")
    if exemplar_Y is not None:
        exemplar_Y = np.asarray(exemplar_Y, dtype=np.float64)
        if exemplar_Y.ndim != 2 or exemplar_Y.shape[1] != 2:
            raise ValueError("exemplar embeddings must be 2-D as well")
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 5))
        for c in np.unique(labels):
            pts = Y[labels == c]
            name = str(label_names[c - 1]) if label_names is not None else str(c)
            (line,) = ax.plot(pts[:, 0], pts[:, 1], "o", ms=3, color=class_color(int(c)),
                              markeredgewidth=0, label=name, zorder=1)
            line.set_gid(f"data-class-{c}")
        if exemplar_Y is not None and len(exemplar_Y):
            (line,) = ax.plot(exemplar_Y[:, 0], exemplar_Y[:, 1], "o", ms=9, mfc="none",
                              mec=EXEMPLAR_COLOR, mew=1.5, label="exemplars", zorder=3)
            line.set_gid("exemplars")
        ax.set_aspect("equal", adjustable="datalim")
        ax.legend(loc="best", fontsize=7, markerscale=1.5)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)


def trace_svg(path, rows):
    """Training curves: mean batch loss and validation error per epoch."""
    epochs = [r["epoch"] for r in rows]
    with plt.rc_context(STYLE):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(8, 3))
        a1.plot(epochs, [r["mean_batch_loss"] for r in rows], "-o", ms=3, color=PALETTE[0])
        a1.set_xlabel("epoch")
        a1.set_ylabel("mean batch loss")
        a2.plot(epochs, [r["val_error"] for r in rows], "-o", ms=3, color=PALETTE[1])
        a2.set_xlabel("epoch")
        a2.set_ylabel("validation 5NN error")
        fig.tight_layout()
        _save(fig, path)


def exemplar_grid_pgm(path, E, labels, per_row=None):
    """Write exemplar images as one binary PGM grid.

    Needs ``H - 1`` to be a perfect square; returns False (and writes
    nothing) otherwise. Pixels are clipped to [0, 1] and scaled to 0..255.
    Images are ordered by label.
    """
    E = np.asarray(E, dtype=np.float64)
    d = E.shape[1] - 1
    side = math.isqrt(d)
    if side * side != d:
        return False
    order = np.argsort(np.asarray(labels), kind="stable")
    imgs = np.clip(E[order, :-1], 0.0, 1.0).reshape(-1, side, side)
    per_row = per_row or int(math.ceil(math.sqrt(len(imgs))))
    rows = int(math.ceil(len(imgs) / per_row))
    pad = 1
    H = rows * (side + pad) + pad
    W = per_row * (side + pad) + pad
    canvas = np.zeros((H, W))
    for i, img in enumerate(imgs):
        r, c = divmod(i, per_row)
        y0, x0 = pad + r * (side + pad), pad + c * (side + pad)
        canvas[y0:y0 + side, x0:x0 + side] = img
    with open(path, "wb") as fh:
        fh.write(f"P5\n{W} {H}\n255\n".encode("ascii"))
        fh.write(np.round(canvas * 255).astype(np.uint8).tobytes())
    return True

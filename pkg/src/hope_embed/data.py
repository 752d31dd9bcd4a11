"""Dataset containers, loaders, preprocessing and synthetic generators.

Synthetic generators (all seeded through ``numpy.random.default_rng``):

``gaussians``
    ``num_classes`` isotropic blobs in ``dim`` dimensions. Class ``c`` is
    centred at ``separation * (cos 2pi c/C, sin 2pi c/C, 0, ...)``. With
    ``subclusters = k > 1`` each class is itself a mixture of ``k`` blobs whose
    centres are offset from the class centre by ``subcluster_spread`` along
    the third axis (or the radial direction when ``dim == 2``), spaced
    symmetrically. Points are ``centre + std * N(0, I)``.

``circles``
    Two-dimensional concentric annuli, one per entry of ``radii``. A point of
    class ``c`` is ``(r_c + noise * N(0,1)) * (cos t, sin t)``, ``t ~ U[0, 2pi)``.

``xor``
    ``(u, v) ~ U[-1, 1]^2`` labelled by ``sign(u) * sign(v)``, followed by
    ``dim - 2`` distractor dimensions drawn from ``noise * N(0, 1)``.

Every generator returns a :class:`LabeledDataset` with the bias column
appended; synthetic features are used unscaled.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
SCALE_0_1 = "scale_0_1"


class DataError(Exception):
    """Base class for dataset problems (bad files, bad labels, bad parameters)."""


class IdxMagicError(DataError):
    pass


class IdxTruncatedError(DataError):
    pass


class IdxCountMismatchError(DataError):
    pass


@dataclass
class RawDataset:
    pixels: np.ndarray
    labels: np.ndarray
    source: str = ""
    integer_valued: bool = False

    def __post_init__(self):
        if len(self.pixels) == 0:
            raise DataError(f"empty dataset from {self.source or 'memory'}")
        if len(self.pixels) != len(self.labels):
            raise IdxCountMismatchError(
                f"{len(self.pixels)} samples but {len(self.labels)} labels in {self.source}"
            )


@dataclass
class LabeledDataset:
    """Model-ready inputs: ``X`` is ``n x H`` with a trailing column of ones,
    ``labels`` take values ``1..num_classes``.

    ``label_values[c - 1]`` is the original label that class ``c`` stands for.
    """

    X: np.ndarray
    labels: np.ndarray
    num_classes: int
    label_values: list = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[0] != self.labels.shape[0]:
            raise DataError(f"inputs {self.X.shape} do not match {self.labels.shape[0]} labels")
        if not np.all(self.X[:, -1] == 1.0):
            raise DataError("the last input component must equal 1 for every row")
        if self.labels.size and (self.labels.min() < 1 or self.labels.max() > self.num_classes):
            raise DataError(f"labels must lie in 1..{self.num_classes}")
        if not self.label_values:
            self.label_values = list(range(1, self.num_classes + 1))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def input_dim(self) -> int:
        return self.X.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes + 1)[1:]

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.X[idx], self.labels[idx], self.num_classes, list(self.label_values))

    def original_labels(self, labels=None):
        labels = self.labels if labels is None else np.asarray(labels)
        return np.asarray(self.label_values, dtype=object)[labels - 1]


def append_bias(F):
    F = np.asarray(F, dtype=np.float64)
    return np.hstack([F, np.ones((F.shape[0], 1))])


def _read_idx(path, magic, what):
    data = Path(path).read_bytes()
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(data) < 4:
        raise IdxTruncatedError(f"{path}: {len(data)} bytes, too short for the magic number")
    (found,) = struct.unpack(">I", data[:4])
    if found != magic:
        raise IdxMagicError(f"{path}: magic 0x{found:08x}, expected 0x{magic:08x} for {what}")
    if len(data) < header:
        raise IdxTruncatedError(f"{path}: {len(data)} bytes, header alone needs {header}")
    dims = struct.unpack(">" + "I" * ndim, data[4:header])
    size = int(np.prod(dims))
    if len(data) - header < size:
        raise IdxTruncatedError(f"{path}: payload has {len(data) - header} bytes, dims {dims} need {size}")
    return np.frombuffer(data, dtype=np.uint8, count=size, offset=header).reshape(dims)


def load_idx(image_path, label_path) -> RawDataset:
    """Read an IDX image file (magic 0x803) and its IDX label file (magic 0x801)."""
    images = _read_idx(image_path, IDX_IMAGE_MAGIC, "images")
    labels = _read_idx(label_path, IDX_LABEL_MAGIC, "labels")
    if images.shape[0] != labels.shape[0]:
        raise IdxCountMismatchError(
            f"{image_path} holds {images.shape[0]} images but {label_path} holds {labels.shape[0]} labels"
        )
    pixels = images.reshape(images.shape[0], -1).astype(np.float64)
    return RawDataset(pixels, labels.astype(np.int64), f"idx:{image_path}", integer_valued=True)


def write_idx(image_path, label_path, images, labels):
    """Write uint8 images (n x rows x cols) and labels in IDX layout."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(image_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, *images.shape))
        fh.write(images.tobytes())
    with open(label_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABEL_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


def load_delimited(path) -> RawDataset:
    """Read rows of ``label, v1, v2, ...`` separated by commas or whitespace.

    Blank lines and lines starting with ``#`` are skipped. A leading header
    row is skipped when its first field is not numeric.
    """
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.replace(",", " ").split()
        try:
            rows.append([float(v) for v in fields])
        except ValueError:
            if not rows:
                continue
            raise DataError(f"{path}:{lineno}: non-numeric field") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    if len({len(r) for r in rows}) != 1:
        raise DataError(f"{path}: rows have differing field counts")
    arr = np.array(rows)
    if arr.shape[1] < 2:
        raise DataError(f"{path}: rows need a label and at least one value")
    labels = arr[:, 0]
    if not np.all(labels == np.round(labels)):
        raise DataError(f"{path}: labels must be integers")
    pixels = arr[:, 1:]
    integer_valued = bool(np.all(pixels == np.round(pixels)) and pixels.max() > 1)
    return RawDataset(pixels, labels.astype(np.int64), f"text:{path}", integer_valued)


def preprocess(raw: RawDataset, scheme=SCALE_0_1, label_values=None) -> LabeledDataset:
    """Scale pixels, append the bias column and remap labels to ``1..c``.

    ``label_values`` fixes the label alphabet (e.g. the one stored in a trained
    model); by default it is the sorted set of labels present.
    """
    if scheme != SCALE_0_1:
        raise DataError(f"unknown preprocessing scheme {scheme!r}")
    feats = raw.pixels / 255.0 if raw.integer_valued else raw.pixels
    values = sorted(set(raw.labels.tolist())) if label_values is None else list(label_values)
    lookup = {v: i + 1 for i, v in enumerate(values)}
    unknown = sorted(set(raw.labels.tolist()) - lookup.keys())
    if unknown:
        raise DataError(f"labels {unknown} not in the label alphabet {values}")
    labels = np.array([lookup[v] for v in raw.labels.tolist()], dtype=np.int64)
    return LabeledDataset(append_bias(feats), labels, len(values), values)


def preprocessing_descriptor(raw: RawDataset, data: LabeledDataset) -> dict:
    return {"scheme": SCALE_0_1, "divide_by_255": raw.integer_valued, "label_values": list(data.label_values)}


def split(data: LabeledDataset, validation_fraction, seed):
    """Stratified random split into (train, validation)."""
    if not 0 < validation_fraction < 1:
        raise ValueError(f"validation fraction must lie in (0, 1), got {validation_fraction}")
    rng = np.random.default_rng(seed)
    train_idx, val_idx = [], []
    for c in range(1, data.num_classes + 1):
        members = np.flatnonzero(data.labels == c)
        members = members[rng.permutation(members.size)]
        n_val = int(round(validation_fraction * members.size))
        if members.size - n_val < 1 or n_val < 1:
            if members.size:
                log.warning("class %d has %d members; kept entirely in the training part", c, members.size)
            train_idx.extend(members.tolist())
            continue
        val_idx.extend(members[:n_val].tolist())
        train_idx.extend(members[n_val:].tolist())
    return data.subset(np.sort(train_idx)), data.subset(np.sort(np.array(val_idx, dtype=np.int64)))


def make_synthetic(kind, seed=0, **params) -> LabeledDataset:
    rng = np.random.default_rng(seed)
    if kind == "gaussians":
        feats, labels = _gaussians(rng, **params)
    elif kind == "circles":
        feats, labels = _circles(rng, **params)
    elif kind == "xor":
        feats, labels = _xor(rng, **params)
    else:
        raise DataError(f"unknown synthetic dataset {kind!r}")
    c = int(labels.max())
    return LabeledDataset(append_bias(feats), labels, c)


def _gaussians(rng, n_per_class=100, num_classes=3, dim=2, std=0.5, separation=4.0,
               subclusters=1, subcluster_spread=1.5):
    if n_per_class < 1 or num_classes < 1 or dim < 2 or std < 0 or subclusters < 1:
        raise DataError("gaussians: need n_per_class, num_classes, subclusters >= 1, dim >= 2, std >= 0")
    feats, labels = [], []
    for c in range(num_classes):
        angle = 2 * np.pi * c / num_classes
        centre = np.zeros(dim)
        centre[:2] = separation * np.cos(angle), separation * np.sin(angle)
        if dim >= 3:
            axis = np.zeros(dim)
            axis[2] = 1.0
        else:
            axis = centre / (np.linalg.norm(centre) or 1.0)
        offsets = np.linspace(-1, 1, subclusters) * subcluster_spread if subclusters > 1 else [0.0]
        which = np.arange(n_per_class) % subclusters
        centres = centre + np.outer(np.asarray(offsets)[which], axis)
        feats.append(centres + std * rng.standard_normal((n_per_class, dim)))
        labels.append(np.full(n_per_class, c + 1))
    return np.vstack(feats), np.concatenate(labels)


def _circles(rng, n_per_class=200, radii=(1.0, 3.0), noise=0.1):
    if n_per_class < 1 or len(radii) < 2 or noise < 0:
        raise DataError("circles: need n_per_class >= 1, two or more radii, noise >= 0")
    feats, labels = [], []
    for c, r in enumerate(radii):
        t = rng.uniform(0, 2 * np.pi, n_per_class)
        rad = r + noise * rng.standard_normal(n_per_class)
        feats.append(np.column_stack([rad * np.cos(t), rad * np.sin(t)]))
        labels.append(np.full(n_per_class, c + 1))
    return np.vstack(feats), np.concatenate(labels)


def _xor(rng, n=400, dim=2, noise=0.5):
    if n < 1 or dim < 2 or noise < 0:
        raise DataError("xor: need n >= 1, dim >= 2, noise >= 0")
    uv = rng.uniform(-1, 1, (n, 2))
    labels = np.where(uv[:, 0] * uv[:, 1] >= 0, 1, 2)
    distract = noise * rng.standard_normal((n, dim - 2))
    return np.hstack([uv, distract]), labels

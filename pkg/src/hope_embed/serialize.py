"""JSON documents for models and exemplar sets.

Arrays are stored row-major as base64 of little-endian float64 bytes, so a
save/load round trip is bit-exact::

    {"format_version": 1, "kind": "model", "variant": "shope",
     "O": 2, "H": 785, "h": 2, "F": 400, "m": 400,
     "arrays": {"C": {"shape": [400, 785], "data": "..."}, ...},
     "preprocessing": {"scheme": "scale_0_1", "divide_by_255": true,
                       "label_values": [0, 1, ...]}}

Exemplar documents use ``"kind": "exemplars"`` with arrays ``E`` and an
integer ``labels`` list plus ``per_class``.
"""

import base64
import json
from pathlib import Path

import numpy as np

from .exemplars import ExemplarSet
from .model import HighOrderModel

FORMAT_VERSION = 1


class FormatError(ValueError):
    pass


def encode_array(a) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def decode_array(doc) -> np.ndarray:
    raw = base64.b64decode(doc["data"])
    shape = tuple(doc["shape"])
    a = np.frombuffer(raw, dtype="<f8")
    if a.size != int(np.prod(shape)):
        raise FormatError(f"array payload has {a.size} values, shape {shape} needs {int(np.prod(shape))}")
    return a.reshape(shape).astype(np.float64)


def _check(doc, kind):
    if doc.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported format_version {doc.get('format_version')!r}")
    if doc.get("kind") != kind:
        raise FormatError(f"expected a {kind} document, got {doc.get('kind')!r}")


def model_to_doc(model: HighOrderModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "model",
        "variant": model.variant,
        "O": model.order,
        "H": model.input_dim,
        "h": model.embed_dim,
        "F": model.num_factors,
        "m": model.num_units,
        "arrays": {name: encode_array(a) for name, a in model.params().items()},
        "preprocessing": model.preprocessing,
    }


def model_from_doc(doc) -> HighOrderModel:
    _check(doc, "model")
    arrays = {name: decode_array(a) for name, a in doc["arrays"].items()}
    try:
        model = HighOrderModel(doc["variant"], doc["O"], arrays["C"], arrays["P"],
                               arrays.get("W"), arrays.get("b"), doc.get("preprocessing", {}))
    except KeyError as exc:
        raise FormatError(f"model document lacks {exc}") from None
    declared = (doc["H"], doc["h"], doc["F"], doc["m"])
    actual = (model.input_dim, model.embed_dim, model.num_factors, model.num_units)
    if tuple(declared) != actual:
        raise FormatError(f"declared dimensions (H, h, F, m)={declared} disagree with arrays {actual}")
    return model


def exemplars_to_doc(ex: ExemplarSet, preprocessing=None) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "exemplars",
        "z": ex.size,
        "H": ex.E.shape[1],
        "per_class": ex.per_class,
        "labels": ex.labels.tolist(),
        "arrays": {"E": encode_array(ex.E)},
        "preprocessing": preprocessing or {},
    }


def exemplars_from_doc(doc) -> ExemplarSet:
    _check(doc, "exemplars")
    return ExemplarSet(decode_array(doc["arrays"]["E"]), np.array(doc["labels"], dtype=np.int64),
                       doc["per_class"])


def _write(path, doc):
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _read(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not a JSON document ({exc})") from None


def save_model(path, model):
    _write(path, model_to_doc(model))


def load_model(path) -> HighOrderModel:
    return model_from_doc(_read(path))


def save_exemplars(path, ex, preprocessing=None):
    _write(path, exemplars_to_doc(ex, preprocessing))


def load_exemplars(path) -> ExemplarSet:
    return exemplars_from_doc(_read(path))

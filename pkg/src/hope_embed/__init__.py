"""Supervised high-order parametric embedding with exemplar compression."""

__version__ = "0.1.0"

from .data import LabeledDataset, make_synthetic, preprocess, split  # noqa: E402
from .evaluation import EvalReport, evaluate_model, knn_classify  # noqa: E402
from .exemplars import ExemplarSet, kmeans_exemplars  # noqa: E402
from .model import HighOrderModel, embed, init_model  # noqa: E402
from .objective import loss_asymmetric, loss_symmetric  # noqa: E402
from .optimizer import TrainConfig, train_embedding, train_joint  # noqa: E402

__all__ = [
    "EvalReport", "ExemplarSet", "HighOrderModel", "LabeledDataset", "TrainConfig",
    "embed", "evaluate_model", "init_model", "kmeans_exemplars", "knn_classify",
    "loss_asymmetric", "loss_symmetric", "make_synthetic", "preprocess", "split",
    "train_embedding", "train_joint",
]

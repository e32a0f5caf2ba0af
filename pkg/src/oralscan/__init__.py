"""Oral-cavity screening CNN: training, evaluation, resolution sweeps, and serving."""

from .network import CLASS_NAMES, ClassLabel, ModelConfig, Prediction, build, predict
from .trainer import HyperParams, load_checkpoint, save_checkpoint, split_dataset, train

__version__ = "0.1.0"

__all__ = [
    "CLASS_NAMES",
    "ClassLabel",
    "ModelConfig",
    "Prediction",
    "HyperParams",
    "build",
    "predict",
    "train",
    "split_dataset",
    "save_checkpoint",
    "load_checkpoint",
    "__version__",
]

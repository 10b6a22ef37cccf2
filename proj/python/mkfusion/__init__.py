"""Hierarchical generative zero-shot learning with knowledge-level fusion."""

from ._core import (
    Dataset,
    Model,
    NumericError,
    ParseError,
    ShapeError,
    TrainConfig,
    Trainer,
    ausuc,
    crossover,
    evaluate,
    generate_dataset,
    harmonic_mean,
    mutate,
    retrieve,
)

__all__ = [
    "Dataset",
    "Model",
    "NumericError",
    "ParseError",
    "ShapeError",
    "TrainConfig",
    "Trainer",
    "ausuc",
    "crossover",
    "evaluate",
    "generate_dataset",
    "harmonic_mean",
    "mutate",
    "retrieve",
]

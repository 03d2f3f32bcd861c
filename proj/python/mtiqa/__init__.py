"""Python bindings for the mtiqa C++ library."""

from ._mtiqa import (
    ConfigError,
    DataError,
    LabelSpace,
    NumericalError,
    Predictor,
    ShapeError,
    default_config,
    distortion_loss,
    fidelity,
    gmad,
    joint_distribution,
    load_config,
    plcc,
    quality_score,
    read_dataset,
    run_cli,
    srcc,
    thurstone,
)

__all__ = [
    "ConfigError",
    "DataError",
    "LabelSpace",
    "NumericalError",
    "Predictor",
    "ShapeError",
    "default_config",
    "distortion_loss",
    "fidelity",
    "gmad",
    "joint_distribution",
    "load_config",
    "plcc",
    "quality_score",
    "read_dataset",
    "run_cli",
    "srcc",
    "thurstone",
]

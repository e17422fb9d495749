"""Video QoE diagnosis: synthetic traces, MOS prediction, anomaly detection and explanations."""

from ._core import (
    Config,
    DivergenceError,
    Error,
    IoError,
    MissingArtifactError,
    Model,
    ValidationError,
    confusion,
    feature_names,
    generate_csv,
    load_features,
    mse_per_session,
    pearson,
    percentile,
    r2_score,
    run,
    threshold_sweep,
)

__all__ = [
    "Config",
    "DivergenceError",
    "Error",
    "IoError",
    "MissingArtifactError",
    "Model",
    "ValidationError",
    "confusion",
    "feature_names",
    "generate_csv",
    "load_features",
    "mse_per_session",
    "pearson",
    "percentile",
    "r2_score",
    "run",
    "threshold_sweep",
]

"""Driver assessment with environment bias removed, plus optimal driver placement."""

from ._drivadv import (
    ConfigError,
    DatasetSchema,
    Error,
    GroundTruth,
    ModelBundle,
    ModelHyper,
    RuntimeFailure,
    SynthConfig,
    __version__,
    cmaes_minimize,
    generate,
    load_dataset,
    place,
    rank,
    run_cli,
    train,
)

__all__ = [
    "ConfigError",
    "DatasetSchema",
    "Error",
    "GroundTruth",
    "ModelBundle",
    "ModelHyper",
    "RuntimeFailure",
    "SynthConfig",
    "__version__",
    "cmaes_minimize",
    "generate",
    "load_dataset",
    "place",
    "rank",
    "run_cli",
    "train",
]

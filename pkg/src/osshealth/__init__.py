"""osshealth: open-source project health metrics and lifecycle-stage
classification, with every learning algorithm implemented in-package."""

__version__ = "0.1.0"

from .data import Dataset, dataset_from_table
from .features import (
    CANONICAL_METRICS,
    FeatureVector,
    LifecycleStage,
    compute_features,
)
from .ingest import ProjectEventLog, load_archive, validate_log

__all__ = [
    "CANONICAL_METRICS",
    "Dataset",
    "FeatureVector",
    "LifecycleStage",
    "ProjectEventLog",
    "compute_features",
    "dataset_from_table",
    "load_archive",
    "validate_log",
    "__version__",
]

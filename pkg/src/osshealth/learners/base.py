"""Shared learner contract, z-score standardization, model persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DimensionMismatch, EmptyInput, OssHealthError

FORMAT_VERSION = 1


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray  # zero-variance columns carry std 1

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        return (X - self.mean) / self.std

    def inverse_transform(self, X):
        return np.asarray(X, dtype=np.float64) * self.std + self.mean

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(mean=np.array(d["mean"]), std=np.array(d["std"]))


def fit_standardizer(X) -> Standardizer:
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        raise EmptyInput("cannot standardize an empty matrix")
    mean = X.mean(axis=0)
    std = X.std(axis=0)  # population std
    std = np.where(std == 0.0, 1.0, std)
    return Standardizer(mean=mean, std=std)


def standardize(s: Standardizer, X):
    return s.transform(X)


def check_columns(model, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DimensionMismatch(
            f"model expects {model.n_features} columns, got {X.shape}"
        )
    return X


def predict(model, X):
    """Label codes from any trained learner."""
    return model.predict(X)


def predict_proba(model, X):
    """Row-stochastic class probabilities (tree-family models only)."""
    if not hasattr(model, "predict_proba"):
        raise OssHealthError(f"{type(model).__name__} has no probability output")
    return model.predict_proba(X)


def save_model(model, path, *, selected_features=None, provenance=None) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "family": model.family,
        "classes": [int(c) for c in model.classes],
        "selected_features": list(selected_features) if selected_features else None,
        "provenance": provenance or {},
        "payload": model.to_dict(),
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path):
    from . import FAMILIES  # late import; avoids a cycle

    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    version = doc.get("format_version")
    if version is None or version > FORMAT_VERSION:
        raise OssHealthError(
            f"{path}: model format_version {version} is newer than supported "
            f"({FORMAT_VERSION}); upgrade the package"
        )
    family = doc["family"]
    if family not in FAMILIES:
        raise OssHealthError(f"{path}: unknown model family {family!r}")
    model = FAMILIES[family].from_dict(doc["payload"])
    return model, doc

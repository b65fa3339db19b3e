"""The in-memory labeled feature table the modeling stages pass around."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UnlabeledRow


@dataclass
class Dataset:
    X: np.ndarray            # row-major float64
    y: np.ndarray            # int label codes; -1 marks an unlabeled row
    column_names: list
    row_ids: list

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2:
            raise ValueError("X must be 2-D")
        if not (len(self.X) == len(self.y) == len(self.row_ids)):
            raise ValueError("X, y, row_ids must have equal length")
        if self.X.size and not np.all(np.isfinite(self.X)):
            raise ValueError("X contains non-finite values")

    @property
    def n_rows(self) -> int:
        return len(self.X)

    def require_labels(self) -> None:
        bad = np.flatnonzero(self.y < 0)
        if bad.size:
            raise UnlabeledRow(f"rows without labels: {[self.row_ids[i] for i in bad[:5]]}")

    def class_counts(self) -> dict:
        labels, counts = np.unique(self.y[self.y >= 0], return_counts=True)
        return {int(l): int(c) for l, c in zip(labels, counts)}

    def take(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            X=self.X[indices].copy(),
            y=self.y[indices].copy(),
            column_names=list(self.column_names),
            row_ids=[self.row_ids[i] for i in indices],
        )

    def select_columns(self, names) -> "Dataset":
        idx = [self.column_names.index(n) for n in names]
        return Dataset(
            X=self.X[:, idx].copy(),
            y=self.y.copy(),
            column_names=list(names),
            row_ids=list(self.row_ids),
        )


def dataset_from_table(matrix, column_names, labels, row_ids) -> Dataset:
    y = np.array([-1 if l is None else int(l) for l in labels], dtype=np.int64)
    return Dataset(X=np.asarray(matrix, dtype=np.float64), y=y,
                   column_names=list(column_names), row_ids=list(row_ids))

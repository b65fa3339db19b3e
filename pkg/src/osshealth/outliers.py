"""Isolation Forest scoring and per-class outlier removal."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import DimensionMismatch, EmptyInput
from .features import LifecycleStage

DEFAULT_CONTAMINATION = {
    LifecycleStage.GRADUATED: 0.01,
    LifecycleStage.INCUBATING: 0.05,
    LifecycleStage.SANDBOX: 0.10,
}


def average_path_length(n: int) -> float:
    """c(n): expected path length of an unsuccessful BST search; the
    normalizer for anomaly scores. 0 for n <= 1."""
    if n <= 1:
        return 0.0
    harmonic = math.log(n - 1) + 0.5772156649015329
    return 2.0 * harmonic - 2.0 * (n - 1) / n


@dataclass
class _Node:
    feature: int = -1
    split_value: float = 0.0
    left: int = -1
    right: int = -1
    size: int = 0  # leaf sample count; internal nodes keep 0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass
class IsolationTree:
    nodes: list

    def path_length(self, x) -> float:
        idx, depth = 0, 0
        node = self.nodes[idx]
        while not node.is_leaf:
            idx = node.left if x[node.feature] < node.split_value else node.right
            node = self.nodes[idx]
            depth += 1
        return depth + average_path_length(node.size)


@dataclass
class IsolationForestModel:
    trees: list
    subsample_size: int
    n_trees: int
    normalizer: float
    n_features: int


def _build_tree(X, rng, depth_cap) -> IsolationTree:
    nodes = []

    def grow(indices, depth) -> int:
        nodes.append(_Node())
        my_idx = len(nodes) - 1
        if depth >= depth_cap or len(indices) <= 1:
            nodes[my_idx].size = len(indices)
            return my_idx
        sub = X[indices]
        mins, maxs = sub.min(axis=0), sub.max(axis=0)
        usable = np.flatnonzero(maxs > mins)  # constant columns cannot split
        if usable.size == 0:
            nodes[my_idx].size = len(indices)
            return my_idx
        feature = int(usable[rng.integers(usable.size)])
        split = float(rng.uniform(mins[feature], maxs[feature]))
        mask = sub[:, feature] < split
        if not mask.any() or mask.all():
            # uniform(min, max) can land on the boundary; force a cut
            split = float(np.nextafter(maxs[feature], mins[feature]))
            mask = sub[:, feature] < split
        if not mask.any() or mask.all():
            nodes[my_idx].size = len(indices)
            return my_idx
        node = nodes[my_idx]
        node.feature = feature
        node.split_value = split
        node.left = grow(indices[mask], depth + 1)
        node.right = grow(indices[~mask], depth + 1)
        return my_idx

    grow(np.arange(len(X)), 0)
    return IsolationTree(nodes=nodes)


def fit_isolation_forest(X, n_trees: int = 100, subsample: int = 256,
                         seed: int = 0) -> IsolationForestModel:
    """Build a seeded forest of random isolation trees."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise EmptyInput("X must be a non-empty 2-D matrix")
    psi = min(subsample, len(X))
    depth_cap = max(1, math.ceil(math.log2(psi))) if psi > 1 else 0
    rng = np.random.default_rng(seed)
    trees = []
    for _ in range(n_trees):
        indices = rng.choice(len(X), size=psi, replace=False)
        trees.append(_build_tree(X[indices], rng, depth_cap))
    return IsolationForestModel(
        trees=trees,
        subsample_size=psi,
        n_trees=n_trees,
        normalizer=average_path_length(psi),
        n_features=X.shape[1],
    )


def anomaly_score(model: IsolationForestModel, x) -> float:
    """s(x) = 2^(-E[h(x)] / c(psi)), in (0, 1); 0.5 when c(psi) = 0."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n_features,):
        raise DimensionMismatch(
            f"expected {model.n_features} features, got shape {x.shape}"
        )
    mean_path = sum(t.path_length(x) for t in model.trees) / model.n_trees
    if model.normalizer == 0.0:
        return 0.5
    return 2.0 ** (-mean_path / model.normalizer)


def anomaly_scores(model: IsolationForestModel, X) -> np.ndarray:
    return np.array([anomaly_score(model, row) for row in np.asarray(X, dtype=np.float64)])


def filter_class_outliers(ds: Dataset, contamination: dict,
                          n_trees: int = 100, subsample: int = 256,
                          seed: int = 0) -> Dataset:
    """Per class, drop the floor(fraction * n_class) highest-scoring rows.

    Ties keep the lower original row index. Survivors keep input order.
    """
    ds.require_labels()
    drop = set()
    for code in sorted(set(int(v) for v in ds.y)):
        fraction = float(contamination.get(LifecycleStage(code), contamination.get(code, 0.0)))
        class_idx = np.flatnonzero(ds.y == code)
        n_drop = int(math.floor(fraction * len(class_idx)))
        if n_drop == 0:
            continue
        model = fit_isolation_forest(ds.X[class_idx], n_trees=n_trees,
                                     subsample=subsample, seed=seed + code)
        scores = anomaly_scores(model, ds.X[class_idx])
        # drop highest scores; on ties drop the higher original index
        order = sorted(range(len(class_idx)), key=lambda i: (-scores[i], -class_idx[i]))
        drop.update(int(class_idx[i]) for i in order[:n_drop])
    keep = [i for i in range(ds.n_rows) if i not in drop]
    return ds.take(keep)

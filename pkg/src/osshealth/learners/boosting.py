"""Gradient boosting with multinomial deviance: one regression tree per
class per round, leaf values by the standard Newton step."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import Dataset
from ..errors import InvalidHyperparam
from .base import check_columns


def softmax(raw):
    shifted = raw - raw.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def multinomial_deviance(raw, onehot) -> float:
    """Negative log-likelihood of the softmax model, summed over rows."""
    log_probs = raw - raw.max(axis=1, keepdims=True)
    log_probs = log_probs - np.log(np.exp(log_probs).sum(axis=1, keepdims=True))
    return float(-(onehot * log_probs).sum())


def deviance_gradient(raw, onehot):
    """d(deviance)/d(raw score) = softmax(raw) - onehot."""
    return softmax(raw) - onehot


# --- regression tree on residuals ------------------------------------------

@dataclass
class _RegNode:
    feature: int = -1
    threshold: float = 0.0
    value: float = 0.0
    left: int = -1
    right: int = -1
    gain: float = 0.0  # SSE reduction of the split; 0 on leaves


class _RegressionTree:
    def __init__(self, nodes):
        self.nodes = nodes

    def predict(self, X):
        out = np.empty(len(X))
        for i, x in enumerate(X):
            node = self.nodes[0]
            while node.feature >= 0:
                node = self.nodes[node.left if x[node.feature] <= node.threshold else node.right]
            out[i] = node.value
        return out

    def to_dict(self):
        return [
            {"feature": n.feature, "threshold": n.threshold, "value": n.value,
             "left": n.left, "right": n.right, "gain": n.gain}
            for n in self.nodes
        ]

    @classmethod
    def from_dict(cls, rows):
        return cls([_RegNode(**r) for r in rows])


def _best_reg_split(X, target, indices, min_samples_leaf):
    """Maximize SSE reduction; ties to lowest feature index / threshold."""
    n = len(indices)
    t = target[indices]
    total_sum, total_sq = t.sum(), (t * t).sum()
    parent_sse = total_sq - total_sum * total_sum / n
    best = None
    for f in range(X.shape[1]):
        col = X[indices, f]
        order = np.argsort(col, kind="stable")
        sc, st = col[order], t[order]
        csum = np.cumsum(st)
        for i in np.flatnonzero(sc[:-1] < sc[1:]):
            n_left = i + 1
            n_right = n - n_left
            if n_left < min_samples_leaf or n_right < min_samples_leaf:
                continue
            left_sum = csum[i]
            right_sum = total_sum - left_sum
            children_sse = (
                total_sq - left_sum * left_sum / n_left - right_sum * right_sum / n_right
            )
            gain = parent_sse - children_sse
            threshold = (sc[i] + sc[i + 1]) / 2.0
            if threshold >= sc[i + 1]:
                threshold = float(sc[i])
            if best is None or gain > best[0]:
                best = (float(gain), int(f), float(threshold))
    return best


def _fit_residual_tree(X, residual, hessian_terms, max_depth, min_samples_leaf,
                       n_classes):
    nodes = []

    def leaf_value(indices):
        num = residual[indices].sum()
        den = hessian_terms[indices].sum()
        if den < 1e-150:
            return 0.0
        return (n_classes - 1) / n_classes * num / den

    def grow(indices, depth):
        nodes.append(_RegNode())
        idx = len(nodes) - 1
        split = None
        if depth < max_depth and len(indices) >= 2 * min_samples_leaf:
            split = _best_reg_split(X, residual, indices, min_samples_leaf)
        if split is None or split[0] <= 0.0:
            nodes[idx].value = leaf_value(indices)
            return idx
        gain, f, threshold = split
        mask = X[indices, f] <= threshold
        node = nodes[idx]
        node.feature = f
        node.threshold = threshold
        node.gain = gain
        node.left = grow(indices[mask], depth + 1)
        node.right = grow(indices[~mask], depth + 1)
        return idx

    grow(np.arange(len(X)), 0)
    return _RegressionTree(nodes)


# --- boosted model ----------------------------------------------------------

@dataclass
class BoostingParams:
    n_stages: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_samples_leaf: int = 1

    def validate(self):
        if self.n_stages < 1:
            raise InvalidHyperparam("n_stages must be >= 1")
        if self.learning_rate < 0:
            raise InvalidHyperparam("learning_rate must be >= 0")
        if self.max_depth < 1:
            raise InvalidHyperparam("max_depth must be >= 1")
        if self.min_samples_leaf < 1:
            raise InvalidHyperparam("min_samples_leaf must be >= 1")


class GradientBoostingModel:
    family = "gradient_boosting"

    def __init__(self, stages, init_raw, classes, params, n_features):
        self.stages = stages            # list of rounds, each a list of K trees
        self.init_raw = np.asarray(init_raw, dtype=np.float64)
        self.classes = np.asarray(classes, dtype=np.int64)
        self.params = params
        self.n_features = n_features

    def decision_raw(self, X):
        X = check_columns(self, X)
        raw = np.tile(self.init_raw, (len(X), 1))
        for round_trees in self.stages:
            for k, tree in enumerate(round_trees):
                raw[:, k] += self.params.learning_rate * tree.predict(X)
        return raw

    def predict_proba(self, X):
        return softmax(self.decision_raw(X))

    def predict(self, X):
        return self.classes[np.argmax(self.predict_proba(X), axis=1)]

    def feature_importance(self):
        """Per-feature total squared-error reduction across all stage
        trees, normalized to sum 1."""
        imp = np.zeros(self.n_features)
        for round_trees in self.stages:
            for tree in round_trees:
                for n in tree.nodes:
                    if n.feature >= 0:
                        imp[n.feature] += n.gain
        total = imp.sum()
        return imp / total if total > 0 else imp

    def to_dict(self):
        return {
            "classes": self.classes.tolist(),
            "n_features": self.n_features,
            "init_raw": self.init_raw.tolist(),
            "params": {
                "n_stages": self.params.n_stages,
                "learning_rate": self.params.learning_rate,
                "max_depth": self.params.max_depth,
                "min_samples_leaf": self.params.min_samples_leaf,
            },
            "stages": [[t.to_dict() for t in rnd] for rnd in self.stages],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            stages=[[_RegressionTree.from_dict(t) for t in rnd] for rnd in d["stages"]],
            init_raw=d["init_raw"],
            classes=d["classes"],
            params=BoostingParams(**d["params"]),
            n_features=d["n_features"],
        )


def train_gradient_boosting(ds: Dataset, params: BoostingParams = None,
                            seed: int = 0) -> GradientBoostingModel:
    """Deterministic multinomial-deviance boosting (seed accepted for
    interface symmetry; training itself has no randomness)."""
    ds.require_labels()
    params = params or BoostingParams()
    params.validate()
    classes = np.unique(ds.y)
    K = len(classes)
    codes = np.searchsorted(classes, ds.y)
    onehot = np.zeros((ds.n_rows, K))
    onehot[np.arange(ds.n_rows), codes] = 1.0

    priors = onehot.mean(axis=0)
    init_raw = np.log(np.clip(priors, 1e-12, None))
    raw = np.tile(init_raw, (ds.n_rows, 1))

    stages = []
    for _ in range(params.n_stages):
        probs = softmax(raw)
        round_trees = []
        for k in range(K):
            residual = onehot[:, k] - probs[:, k]
            hessian = probs[:, k] * (1.0 - probs[:, k])
            tree = _fit_residual_tree(
                ds.X, residual, hessian,
                max_depth=params.max_depth,
                min_samples_leaf=params.min_samples_leaf,
                n_classes=max(K, 2),
            )
            raw[:, k] += params.learning_rate * tree.predict(ds.X)
            round_trees.append(tree)
        stages.append(round_trees)
    return GradientBoostingModel(stages=stages, init_raw=init_raw, classes=classes,
                                 params=params, n_features=ds.X.shape[1])

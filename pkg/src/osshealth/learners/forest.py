"""Random forest: bootstrapped CART trees with sqrt-p feature sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..data import Dataset
from ..errors import InvalidHyperparam
from .base import check_columns
from .tree import DecisionTreeModel, TreeParams, _grow_tree


@dataclass
class ForestParams:
    n_trees: int = 100
    max_depth: Optional[int] = None
    min_samples_leaf: int = 1
    min_samples_split: int = 2
    bootstrap: bool = True  # test hook: False trains every tree on the full data
    max_features: Optional[str] = "sqrt"  # "sqrt" or None (all features)

    def validate(self):
        if self.max_features not in ("sqrt", None):
            raise InvalidHyperparam("max_features must be 'sqrt' or None")
        if self.n_trees < 1:
            raise InvalidHyperparam("n_trees must be >= 1")
        TreeParams(
            max_depth=self.max_depth,
            min_samples_split=self.min_samples_split,
            min_samples_leaf=self.min_samples_leaf,
        ).validate()


class RandomForestModel:
    family = "random_forest"

    def __init__(self, trees, classes, params: ForestParams, n_features: int):
        self.trees = trees
        self.classes = np.asarray(classes, dtype=np.int64)
        self.params = params
        self.n_features = n_features

    def predict_proba(self, X):
        X = check_columns(self, X)
        votes = np.zeros((len(X), len(self.classes)))
        code_of = {int(c): i for i, c in enumerate(self.classes)}
        for tree in self.trees:
            for i, label in enumerate(tree.predict(X)):
                votes[i, code_of[int(label)]] += 1
        return votes / len(self.trees)

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes[np.argmax(proba, axis=1)]  # argmax ties -> lowest code

    def feature_importance(self):
        """Mean of member-tree MDI importances, renormalized to sum 1."""
        imp = np.zeros(self.n_features)
        for tree in self.trees:
            imp += tree.feature_importance()
        total = imp.sum()
        return imp / total if total > 0 else imp

    def to_dict(self):
        return {
            "classes": self.classes.tolist(),
            "n_features": self.n_features,
            "params": {
                "n_trees": self.params.n_trees,
                "max_depth": self.params.max_depth,
                "min_samples_leaf": self.params.min_samples_leaf,
                "min_samples_split": self.params.min_samples_split,
                "bootstrap": self.params.bootstrap,
                "max_features": self.params.max_features,
            },
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            trees=[DecisionTreeModel.from_dict(t) for t in d["trees"]],
            classes=d["classes"],
            params=ForestParams(**d["params"]),
            n_features=d["n_features"],
        )


def train_random_forest(ds: Dataset, params: ForestParams = None,
                        seed: int = 0) -> RandomForestModel:
    ds.require_labels()
    params = params or ForestParams()
    params.validate()
    classes = np.unique(ds.y)
    if params.max_features == "sqrt":
        n_feat_split = max(1, int(math.sqrt(ds.X.shape[1])))
    else:
        n_feat_split = ds.X.shape[1]
    tree_params = TreeParams(
        max_depth=params.max_depth,
        min_samples_split=params.min_samples_split,
        min_samples_leaf=params.min_samples_leaf,
    )
    rng = np.random.default_rng(seed)
    trees = []
    for _ in range(params.n_trees):
        if params.bootstrap:
            rows = rng.integers(0, ds.n_rows, size=ds.n_rows)
        else:
            rows = np.arange(ds.n_rows)
        Xb, yb = ds.X[rows], ds.y[rows]
        codes = np.searchsorted(classes, yb)

        def sample_features(p):
            if n_feat_split >= p:
                return range(p)
            return sorted(rng.choice(p, size=n_feat_split, replace=False))

        nodes = _grow_tree(Xb, codes, tree_params, n_classes=len(classes),
                           feature_sampler=sample_features)
        trees.append(DecisionTreeModel(nodes=nodes, classes=classes,
                                       params=tree_params, n_features=ds.X.shape[1]))
    return RandomForestModel(trees=trees, classes=classes, params=params,
                             n_features=ds.X.shape[1])

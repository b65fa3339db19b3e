"""CART classification tree: Gini splits, best-first growth under a leaf
budget, and minimal cost-complexity pruning."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..data import Dataset
from ..errors import InvalidHyperparam
from .base import check_columns


def gini(class_counts) -> float:
    counts = np.asarray(class_counts, dtype=np.float64)
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - np.dot(p, p))


@dataclass
class TreeNode:
    feature: int = -1          # -1 marks a leaf
    threshold: float = 0.0     # go left when x[feature] <= threshold
    impurity: float = 0.0
    n_samples: int = 0
    class_counts: np.ndarray = None
    left: int = -1
    right: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass
class TreeParams:
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_leaf_nodes: Optional[int] = None
    ccp_alpha: float = 0.0

    def validate(self):
        if self.max_depth is not None and self.max_depth < 1:
            raise InvalidHyperparam("max_depth must be >= 1 or None")
        if self.min_samples_split < 2:
            raise InvalidHyperparam("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise InvalidHyperparam("min_samples_leaf must be >= 1")
        if self.max_leaf_nodes is not None and self.max_leaf_nodes < 2:
            raise InvalidHyperparam("max_leaf_nodes must be >= 2 or None")
        if self.ccp_alpha < 0:
            raise InvalidHyperparam("ccp_alpha must be >= 0")


def best_split(X, codes, indices, feature_ids, min_samples_leaf):
    """Best (gain, feature, threshold) over midpoint candidates, or None.

    Ties go to the lowest feature index, then the lowest threshold.
    """
    n = len(indices)
    n_classes = int(codes.max()) + 1 if len(codes) else 1
    sub_codes = codes[indices]
    parent = np.bincount(sub_codes, minlength=n_classes).astype(np.float64)
    parent_gini = gini(parent)
    best = None  # (gain, feature, threshold)
    for f in feature_ids:
        col = X[indices, f]
        order = np.argsort(col, kind="stable")
        sc, sy = col[order], sub_codes[order]
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), sy] = 1.0
        cum = np.cumsum(onehot, axis=0)  # cum[i] = class counts of first i+1
        # candidate boundaries between distinct consecutive values
        cut = np.flatnonzero(sc[:-1] < sc[1:])
        for i in cut:
            n_left = i + 1
            n_right = n - n_left
            if n_left < min_samples_leaf or n_right < min_samples_leaf:
                continue
            left_counts = cum[i]
            right_counts = parent - left_counts
            g_left = 1.0 - np.dot(left_counts / n_left, left_counts / n_left)
            g_right = 1.0 - np.dot(right_counts / n_right, right_counts / n_right)
            gain = parent_gini - (n_left / n) * g_left - (n_right / n) * g_right
            threshold = (sc[i] + sc[i + 1]) / 2.0
            if threshold >= sc[i + 1]:  # float midpoint collapsed onto the upper value
                threshold = float(sc[i])
            if best is None or gain > best[0]:
                best = (float(gain), int(f), float(threshold))
    return best


class DecisionTreeModel:
    family = "decision_tree"

    def __init__(self, nodes, classes, params: TreeParams, n_features: int):
        self.nodes = nodes
        self.classes = np.asarray(classes, dtype=np.int64)
        self.params = params
        self.n_features = n_features

    # --- prediction --------------------------------------------------

    def _leaf_for(self, x):
        node = self.nodes[0]
        while not node.is_leaf:
            node = self.nodes[node.left if x[node.feature] <= node.threshold else node.right]
        return node

    def predict(self, X):
        X = check_columns(self, X)
        out = np.empty(len(X), dtype=np.int64)
        for i, x in enumerate(X):
            counts = self._leaf_for(x).class_counts
            out[i] = self.classes[int(np.argmax(counts))]  # argmax ties -> lowest code
        return out

    def predict_proba(self, X):
        X = check_columns(self, X)
        out = np.empty((len(X), len(self.classes)))
        for i, x in enumerate(X):
            counts = self._leaf_for(x).class_counts
            out[i] = counts / counts.sum()
        return out

    # --- interpretation ----------------------------------------------

    def feature_importance(self):
        """Mean decrease in impurity per feature, normalized to sum 1."""
        imp = np.zeros(self.n_features)
        n_root = self.nodes[0].n_samples
        for node in self.nodes:
            if node.is_leaf:
                continue
            left, right = self.nodes[node.left], self.nodes[node.right]
            decrease = (
                node.n_samples * node.impurity
                - left.n_samples * left.impurity
                - right.n_samples * right.impurity
            ) / n_root
            imp[node.feature] += decrease
        total = imp.sum()
        return imp / total if total > 0 else imp

    def n_leaves(self) -> int:
        return sum(1 for n in self.nodes if n.is_leaf)

    def depth(self) -> int:
        def walk(idx):
            node = self.nodes[idx]
            if node.is_leaf:
                return 0
            return 1 + max(walk(node.left), walk(node.right))
        return walk(0)

    # --- persistence --------------------------------------------------

    def to_dict(self):
        return {
            "classes": self.classes.tolist(),
            "n_features": self.n_features,
            "params": {
                "max_depth": self.params.max_depth,
                "min_samples_split": self.params.min_samples_split,
                "min_samples_leaf": self.params.min_samples_leaf,
                "max_leaf_nodes": self.params.max_leaf_nodes,
                "ccp_alpha": self.params.ccp_alpha,
            },
            "nodes": [
                {
                    "feature": n.feature,
                    "threshold": n.threshold,
                    "impurity": n.impurity,
                    "n_samples": n.n_samples,
                    "class_counts": n.class_counts.tolist(),
                    "left": n.left,
                    "right": n.right,
                }
                for n in self.nodes
            ],
        }

    @classmethod
    def from_dict(cls, d):
        nodes = [
            TreeNode(
                feature=n["feature"],
                threshold=n["threshold"],
                impurity=n["impurity"],
                n_samples=n["n_samples"],
                class_counts=np.array(n["class_counts"], dtype=np.float64),
                left=n["left"],
                right=n["right"],
            )
            for n in d["nodes"]
        ]
        return cls(nodes=nodes, classes=d["classes"],
                   params=TreeParams(**d["params"]), n_features=d["n_features"])


def _grow_tree(X, codes, params, n_classes, feature_sampler=None):
    """Shared growth routine. feature_sampler(n_features) -> candidate
    feature ids for one node (random forests restrict them)."""
    nodes = []

    def make_node(indices, counts):
        nodes.append(TreeNode(
            impurity=gini(counts),
            n_samples=len(indices),
            class_counts=counts.astype(np.float64),
        ))
        return len(nodes) - 1

    def candidates(idx, indices, depth):
        node = nodes[idx]
        if node.impurity == 0.0:
            return None
        if params.max_depth is not None and depth >= params.max_depth:
            return None
        if node.n_samples < params.min_samples_split:
            return None
        feats = (
            feature_sampler(X.shape[1]) if feature_sampler is not None
            else range(X.shape[1])
        )
        return best_split(X, codes, indices, feats, params.min_samples_leaf)

    def apply_split(idx, indices, split):
        gain, f, threshold = split
        node = nodes[idx]
        node.feature = f
        node.threshold = threshold
        mask = X[indices, f] <= threshold
        left_idx, right_idx = indices[mask], indices[~mask]
        lc = np.bincount(codes[left_idx], minlength=n_classes).astype(np.float64)
        rc = node.class_counts - lc
        node.left = make_node(left_idx, lc)
        node.right = make_node(right_idx, rc)
        return left_idx, right_idx

    root_indices = np.arange(len(X))
    root_counts = np.bincount(codes, minlength=n_classes).astype(np.float64)
    root = make_node(root_indices, root_counts)

    if params.max_leaf_nodes is None:
        # depth-first greedy growth
        stack = [(root, root_indices, 0)]
        while stack:
            idx, indices, depth = stack.pop()
            split = candidates(idx, indices, depth)
            if split is None:
                continue
            left_idx, right_idx = apply_split(idx, indices, split)
            node = nodes[idx]
            stack.append((node.right, right_idx, depth + 1))
            stack.append((node.left, left_idx, depth + 1))
    else:
        # best-first growth under the leaf budget; expand largest
        # weighted impurity decrease first, FIFO on ties
        counter = 0
        heap = []

        def push(idx, indices, depth):
            nonlocal counter
            split = candidates(idx, indices, depth)
            if split is None:
                return
            weighted_gain = split[0] * nodes[idx].n_samples / len(X)
            heapq.heappush(heap, (-weighted_gain, counter, idx, indices, depth, split))
            counter += 1

        push(root, root_indices, 0)
        n_leaves = 1
        while heap and n_leaves < params.max_leaf_nodes:
            _, _, idx, indices, depth, split = heapq.heappop(heap)
            left_idx, right_idx = apply_split(idx, indices, split)
            n_leaves += 1
            node = nodes[idx]
            push(node.left, left_idx, depth + 1)
            push(node.right, right_idx, depth + 1)
    return nodes


def _subtree_stats(nodes, n_root):
    """Per node: (leaf count, subtree risk) with R(leaf) = w * gini."""
    n_leaves = {}
    risk = {}

    def walk(idx):
        node = nodes[idx]
        if node.is_leaf:
            n_leaves[idx] = 1
            risk[idx] = node.n_samples / n_root * node.impurity
        else:
            walk(node.left)
            walk(node.right)
            n_leaves[idx] = n_leaves[node.left] + n_leaves[node.right]
            risk[idx] = risk[node.left] + risk[node.right]

    walk(0)
    return n_leaves, risk


def prune_cost_complexity(model: DecisionTreeModel, alpha: float) -> DecisionTreeModel:
    """Weakest-link pruning: collapse the internal node with the smallest
    effective alpha until every effective alpha exceeds alpha."""
    if alpha < 0:
        raise InvalidHyperparam("alpha must be >= 0")
    if alpha == 0:
        return model  # every effective alpha is >= 0, so nothing collapses
    nodes = [TreeNode(
        feature=n.feature, threshold=n.threshold, impurity=n.impurity,
        n_samples=n.n_samples, class_counts=n.class_counts.copy(),
        left=n.left, right=n.right,
    ) for n in model.nodes]
    n_root = nodes[0].n_samples

    while True:
        n_leaves, risk = _subtree_stats(nodes, n_root)
        # collapsed subtrees leave orphan nodes behind; only nodes still
        # reachable from the root are candidates
        internal = [i in n_leaves and not nodes[i].is_leaf for i in range(len(nodes))]
        internal = [i for i, live in enumerate(internal) if live]
        if not internal:
            break
        weakest, weakest_alpha = None, None
        for i in internal:
            node = nodes[i]
            own_risk = node.n_samples / n_root * node.impurity
            a_eff = (own_risk - risk[i]) / (n_leaves[i] - 1)
            if weakest_alpha is None or a_eff < weakest_alpha:
                weakest, weakest_alpha = i, a_eff
        if weakest_alpha > alpha:
            break
        node = nodes[weakest]
        node.feature = -1
        node.left = node.right = -1

    # compact out unreachable nodes
    keep, remap = [], {}

    def collect(idx):
        remap[idx] = len(keep)
        keep.append(nodes[idx])
        if not nodes[idx].is_leaf:
            collect(nodes[idx].left)
            collect(nodes[idx].right)

    collect(0)
    for n in keep:
        if not n.is_leaf:
            n.left, n.right = remap[n.left], remap[n.right]
    return DecisionTreeModel(nodes=keep, classes=model.classes,
                             params=model.params, n_features=model.n_features)


def train_decision_tree(ds: Dataset, params: TreeParams = None,
                        seed: int = 0) -> DecisionTreeModel:
    """Greedy CART growth followed by cost-complexity pruning.

    Deterministic: ties among equal-gain splits go to the lowest feature
    index, then lowest threshold (the seed is accepted for interface
    symmetry with the stochastic learners)."""
    ds.require_labels()
    params = params or TreeParams()
    params.validate()
    if ds.n_rows < 1:
        raise InvalidHyperparam("dataset must have at least one row")
    classes = np.unique(ds.y)
    codes = np.searchsorted(classes, ds.y)
    nodes = _grow_tree(ds.X, codes, params, n_classes=len(classes))
    model = DecisionTreeModel(nodes=nodes, classes=classes, params=params,
                              n_features=ds.X.shape[1])
    if params.ccp_alpha > 0:
        model = prune_cost_complexity(model, params.ccp_alpha)
    return model

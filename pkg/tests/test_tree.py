import itertools

import numpy as np
import pytest

from osshealth.data import Dataset
from osshealth.errors import InvalidHyperparam
from osshealth.learners.tree import (
    DecisionTreeModel,
    TreeParams,
    best_split,
    gini,
    prune_cost_complexity,
    train_decision_tree,
)

from .conftest import make_blobs


def _ds(X, y):
    X = np.asarray(X, dtype=np.float64)
    return Dataset(X=X, y=np.asarray(y), column_names=[f"f{i}" for i in range(X.shape[1])],
                   row_ids=[f"r{i}" for i in range(len(X))])


def test_gini_values():
    assert gini([10, 0]) == 0.0
    assert gini([5, 5]) == pytest.approx(0.5)
    assert gini([1, 1, 1]) == pytest.approx(2.0 / 3.0)
    assert gini([]) == 0.0
    assert gini([0, 0]) == 0.0


# --- root split oracle -------------------------------------------------------

def root_split_oracle(X, y):
    """Best Gini gain by exhausting every feature/midpoint candidate."""
    n, p = X.shape
    classes = sorted(set(int(v) for v in y))
    parent = gini([np.sum(y == c) for c in classes])
    best_gain = None
    for f in range(p):
        for threshold in sorted(set(X[:, f])):
            left = y[X[:, f] <= threshold]
            right = y[X[:, f] > threshold]
            if len(left) == 0 or len(right) == 0:
                continue
            g = parent - (
                len(left) / n * gini([np.sum(left == c) for c in classes])
                + len(right) / n * gini([np.sum(right == c) for c in classes])
            )
            if best_gain is None or g > best_gain + 1e-15:
                best_gain = g
    return best_gain


def test_root_split_matches_exhaustive_oracle():
    rng = np.random.default_rng(0)
    for trial in range(200):
        n = int(rng.integers(2, 13))
        n_classes = int(rng.integers(2, 4))
        X = rng.normal(size=(n, 2))
        y = rng.integers(0, n_classes, size=n)
        if len(set(int(v) for v in y)) < 2:
            y[0] = (y[0] + 1) % n_classes
        codes = np.asarray(y, dtype=np.int64)
        split = best_split(X, codes, np.arange(n), range(2), min_samples_leaf=1)
        oracle = root_split_oracle(X, codes)
        if oracle is None or oracle <= 1e-15:
            continue
        assert split is not None, f"trial {trial}"
        assert split[0] == pytest.approx(oracle, abs=1e-12), f"trial {trial}"


def test_split_tie_breaks_lowest_feature_then_threshold():
    # two identical columns: feature 0 must win the tie
    X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    y = np.array([0, 0, 1, 1])
    split = best_split(X, y, np.arange(4), range(2), min_samples_leaf=1)
    assert split[1] == 0
    assert split[2] == pytest.approx(1.5)


def test_midpoint_guard_on_adjacent_floats():
    lo = 1.0
    hi = np.nextafter(1.0, 2.0)
    X = np.array([[lo], [hi]])
    y = np.array([0, 1])
    split = best_split(X, y, np.arange(2), range(1), min_samples_leaf=1)
    gain, f, threshold = split
    # the predicate x <= threshold must still separate the two rows
    assert lo <= threshold < hi


# --- full training ------------------------------------------------------------

def test_pure_dataset_single_leaf():
    ds = _ds(np.random.default_rng(0).normal(size=(10, 3)), [1] * 10)
    model = train_decision_tree(ds)
    assert model.n_leaves() == 1
    assert np.all(model.predict(ds.X) == 1)


def test_separable_data_perfect_fit():
    ds = make_blobs(seed=1, n_per=15)
    model = train_decision_tree(ds)
    assert np.array_equal(model.predict(ds.X), ds.y)
    proba = model.predict_proba(ds.X)
    assert proba.shape == (45, 3)
    assert np.allclose(proba.sum(axis=1), 1.0)


def test_one_dimensional_split():
    X = np.array([[0.0], [1.0], [2.0], [10.0], [11.0], [12.0]])
    y = np.array([0, 0, 0, 1, 1, 1])
    model = train_decision_tree(_ds(X, y))
    assert model.n_leaves() == 2
    assert model.nodes[0].threshold == pytest.approx(6.0)
    assert np.array_equal(model.predict(X), y)


def test_feature_importance_informative_column():
    rng = np.random.default_rng(2)
    X = np.column_stack([np.repeat([0.0, 10.0], 20), rng.normal(size=40)])
    y = np.repeat([0, 1], 20)
    model = train_decision_tree(_ds(X, y))
    imp = model.feature_importance()
    assert imp[0] == pytest.approx(1.0)
    assert imp[1] == pytest.approx(0.0)
    assert imp.sum() == pytest.approx(1.0)


def test_max_depth_and_min_samples_respected():
    ds = make_blobs(seed=3, n_per=20, scale=2.0)
    model = train_decision_tree(ds, TreeParams(max_depth=2))
    assert model.depth() <= 2
    model = train_decision_tree(ds, TreeParams(min_samples_leaf=10))
    assert all(n.n_samples >= 10 for n in model.nodes if n.is_leaf)


def test_max_leaf_nodes_budget():
    ds = make_blobs(seed=4, n_per=20, scale=2.5)
    for budget in (2, 3, 5):
        model = train_decision_tree(ds, TreeParams(max_leaf_nodes=budget))
        assert model.n_leaves() <= budget


def test_params_validation():
    ds = make_blobs(seed=0, n_per=5)
    for bad in (TreeParams(max_depth=0), TreeParams(min_samples_split=1),
                TreeParams(min_samples_leaf=0), TreeParams(max_leaf_nodes=1),
                TreeParams(ccp_alpha=-0.1)):
        with pytest.raises(InvalidHyperparam):
            train_decision_tree(ds, bad)


def test_serialization_round_trip():
    ds = make_blobs(seed=5, n_per=12)
    model = train_decision_tree(ds, TreeParams(max_depth=4))
    clone = DecisionTreeModel.from_dict(model.to_dict())
    assert np.array_equal(clone.predict(ds.X), model.predict(ds.X))
    assert np.allclose(clone.predict_proba(ds.X), model.predict_proba(ds.X))


# --- pruning -------------------------------------------------------------------

def _subtree_objective(model, alpha):
    """cost + alpha * leaves for the tree as it stands."""
    n_root = model.nodes[0].n_samples
    risk = sum(
        n.n_samples / n_root * n.impurity for n in model.nodes if n.is_leaf
    )
    return risk + alpha * model.n_leaves()


def _enumerate_pruned(model):
    """Every pruned subtree, as frozensets of collapsed internal nodes."""
    internal = [i for i, n in enumerate(model.nodes) if not n.is_leaf]

    def descendants(idx):
        node = model.nodes[idx]
        if node.is_leaf:
            return set()
        return {node.left, node.right} | descendants(node.left) | descendants(node.right)

    results = []
    for r in range(len(internal) + 1):
        for combo in itertools.combinations(internal, r):
            collapsed = set(combo)
            # a collapse set is valid in any order; evaluate the result
            live_leaves = 0
            risk = 0.0
            n_root = model.nodes[0].n_samples

            def walk(idx):
                nonlocal live_leaves, risk
                node = model.nodes[idx]
                if node.is_leaf or idx in collapsed:
                    live_leaves += 1
                    risk += node.n_samples / n_root * node.impurity
                    return
                walk(node.left)
                walk(node.right)

            walk(0)
            results.append((risk, live_leaves))
    return results


def pruning_oracle_objective(model, alpha):
    return min(r + alpha * l for r, l in _enumerate_pruned(model))


def test_pruning_matches_exhaustive_oracle():
    rng = np.random.default_rng(1)
    for trial in range(50):
        n = int(rng.integers(8, 25))
        X = rng.normal(size=(n, 2))
        y = rng.integers(0, 3, size=n)
        if len(set(int(v) for v in y)) < 2:
            y[0] = (y[0] + 1) % 3
        model = train_decision_tree(_ds(X, y), TreeParams(max_depth=4))
        for alpha in (0.01, 0.05, 0.2):
            pruned = prune_cost_complexity(model, alpha)
            got = _subtree_objective(pruned, alpha)
            want = pruning_oracle_objective(model, alpha)
            assert got == pytest.approx(want, abs=1e-12), f"trial {trial} alpha {alpha}"


def test_pruning_alpha_zero_is_identity():
    ds = make_blobs(seed=6, n_per=10)
    model = train_decision_tree(ds)
    pruned = prune_cost_complexity(model, 0.0)
    assert pruned is model


def test_pruning_monotone_leaf_counts():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(60, 3))
    y = rng.integers(0, 3, size=60)
    model = train_decision_tree(_ds(X, y))
    leaves = [prune_cost_complexity(model, a).n_leaves()
              for a in (0.001, 0.01, 0.05, 0.1, 0.5)]
    assert leaves == sorted(leaves, reverse=True)
    assert leaves[-1] >= 1


def test_pruning_huge_alpha_collapses_to_root():
    ds = make_blobs(seed=7, n_per=10)
    model = train_decision_tree(ds)
    pruned = prune_cost_complexity(model, 1e9)
    assert pruned.n_leaves() == 1


def test_pruning_rejects_negative_alpha():
    ds = make_blobs(seed=0, n_per=5)
    model = train_decision_tree(ds)
    with pytest.raises(InvalidHyperparam):
        prune_cost_complexity(model, -0.1)

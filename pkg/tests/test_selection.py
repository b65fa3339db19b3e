import numpy as np
import pytest

from osshealth.data import Dataset
from osshealth.errors import ClassTooSmall, EmptyGrid, KTooLarge, OssHealthError
from osshealth.selection import (
    CvSpec,
    _expand_grid,
    cross_val_score,
    forward_sfs,
    grid_search,
    stratified_kfold,
    stratified_split,
)

from .conftest import make_blobs

FAST_CV = CvSpec(k=3, repeats=1, seed=0, resample=False)


def _imbalanced_ds(seed=0, counts=(22, 30, 101)):
    rng = np.random.default_rng(seed)
    rows, labels = [], []
    for code, (n, center) in enumerate(zip(counts, (0.0, 6.0, 12.0))):
        rows.append(rng.normal(center, 1.0, size=(n, 2)))
        labels.extend([code] * n)
    X = np.vstack(rows)
    return Dataset(X=X, y=np.array(labels), column_names=["f0", "f1"],
                   row_ids=[f"r{i}" for i in range(len(X))])


# --- stratified split ----------------------------------------------------------

def test_split_supports_22_30_101():
    ds = _imbalanced_ds()
    train, test = stratified_split(ds, 0.2, seed=0)
    assert test.class_counts() == {0: 4, 1: 6, 2: 21}
    assert train.class_counts() == {0: 18, 1: 24, 2: 80}


def test_split_is_a_partition():
    ds = make_blobs(seed=1, n_per=17)
    train, test = stratified_split(ds, 0.25, seed=3)
    assert set(train.row_ids) | set(test.row_ids) == set(ds.row_ids)
    assert set(train.row_ids) & set(test.row_ids) == set()
    assert train.n_rows + test.n_rows == ds.n_rows


def test_split_deterministic_and_seed_sensitive():
    ds = make_blobs(seed=2, n_per=20)
    a = stratified_split(ds, 0.2, seed=5)[1].row_ids
    b = stratified_split(ds, 0.2, seed=5)[1].row_ids
    c = stratified_split(ds, 0.2, seed=6)[1].row_ids
    assert a == b
    assert a != c


def test_split_rejects_bad_fraction_and_tiny_class():
    ds = make_blobs(seed=0, n_per=5)
    with pytest.raises(OssHealthError):
        stratified_split(ds, 0.0)
    with pytest.raises(OssHealthError):
        stratified_split(ds, 1.0)
    tiny = ds.take([0, 5, 6, 10, 11])  # class 0 has one row
    with pytest.raises(ClassTooSmall):
        stratified_split(tiny, 0.2)


# --- k-fold ----------------------------------------------------------------------

@pytest.mark.filterwarnings("ignore::osshealth.errors.KTooLarge")
def test_kfold_counts_deviate_at_most_one():
    rng = np.random.default_rng(0)
    for trial in range(100):
        n = int(rng.integers(20, 60))
        y = rng.integers(0, 3, size=n)
        k = int(rng.integers(2, 6))
        folds = stratified_kfold(y, k, seed=trial)
        assert set(folds) <= set(range(k))
        for code in set(int(v) for v in y):
            per_fold = [np.sum((folds == f) & (y == code)) for f in range(k)]
            assert max(per_fold) - min(per_fold) <= 1, f"trial {trial}"


def test_kfold_warns_when_class_smaller_than_k():
    y = np.array([0, 0, 0, 1, 1, 1, 1, 1, 1, 1])
    with pytest.warns(KTooLarge):
        stratified_kfold(y, k=5, seed=0)


# --- cross_val_score ----------------------------------------------------------------

def test_cv_returns_k_times_repeats_scores():
    ds = make_blobs(seed=3, n_per=12)
    cv = CvSpec(k=4, repeats=3, seed=0, resample=False)
    scores = cross_val_score("decision_tree", {"max_depth": 3}, ds, cv)
    assert len(scores) == 12
    assert all(0.0 <= s <= 1.0 for s in scores)


def test_cv_deterministic():
    ds = make_blobs(seed=4, n_per=10, scale=2.0)
    cv = CvSpec(k=3, repeats=2, seed=1, resample=False)
    a = cross_val_score("decision_tree", {}, ds, cv)
    b = cross_val_score("decision_tree", {}, ds, cv)
    assert a == b


def test_cv_leakage_canary_does_not_inflate_scores():
    # a canary column that equals the label only in held-out folds must
    # not help a leak-free pipeline
    ds = make_blobs(seed=5, n_per=15, scale=3.0)
    cv = CvSpec(k=5, repeats=2, seed=0, resample=False)
    baseline = np.nanmean(cross_val_score("decision_tree", {"max_depth": 4}, ds, cv))

    def canary_hook(X_train, y_train, X_test, y_test):
        train_col = np.zeros((len(X_train), 1))
        test_col = np.asarray(y_test, dtype=np.float64).reshape(-1, 1)
        return np.hstack([X_train, train_col]), np.hstack([X_test, test_col])

    with_canary = np.nanmean(cross_val_score(
        "decision_tree", {"max_depth": 4}, ds, cv, fold_hook=canary_hook))
    assert abs(with_canary - baseline) <= 0.05


def test_cv_macro_f1_scoring():
    ds = make_blobs(seed=6, n_per=12)
    cv = CvSpec(k=3, repeats=1, seed=0, scoring="macro_f1", resample=False)
    scores = cross_val_score("decision_tree", {}, ds, cv)
    assert all(0.0 <= s <= 1.0 for s in scores)


def test_cv_spec_validation():
    with pytest.raises(OssHealthError):
        CvSpec(k=1).validate()
    with pytest.raises(OssHealthError):
        CvSpec(repeats=0).validate()
    with pytest.raises(OssHealthError):
        CvSpec(scoring="auc").validate()


# --- grid expansion and search -----------------------------------------------------

def test_expand_grid_collapses_duplicates():
    combos = _expand_grid({"C": [0.001, 0.001, 0.1], "gamma": [1, 10]})
    assert len(combos) == 4
    assert combos[0] == {"C": 0.001, "gamma": 1}


def test_default_grid_sizes():
    from osshealth.pipeline import DEFAULT_GRIDS

    assert len(_expand_grid(DEFAULT_GRIDS["decision_tree"])) == 5 * 3 * 4 * 4 * 4
    assert len(_expand_grid(DEFAULT_GRIDS["random_forest"])) == 3 * 3 * 3
    assert len(_expand_grid(DEFAULT_GRIDS["gradient_boosting"])) == 3 * 3 * 3
    # the SVM C list repeats one value; expansion collapses it
    assert len(_expand_grid(DEFAULT_GRIDS["svm_rbf"])) == 5 * 5


def test_grid_search_picks_best_mean():
    ds = make_blobs(seed=7, n_per=12)
    result = grid_search("decision_tree", {"max_depth": [1, 5]}, ds, FAST_CV)
    means = [c["mean"] for c in result.combinations]
    assert result.combinations[result.best_index]["mean"] == max(means)
    # depth 1 cannot separate three clusters; depth 5 must win
    assert result.best_params == {"max_depth": 5}


def test_grid_search_tie_prefers_simpler():
    # both depths solve the problem perfectly; the shallower tree wins
    ds = make_blobs(seed=8, n_per=12)
    result = grid_search("decision_tree", {"max_depth": [15, 3]}, ds, FAST_CV)
    assert result.best_params == {"max_depth": 3}


def test_grid_search_empty_grid():
    ds = make_blobs(seed=0, n_per=6)
    with pytest.raises(EmptyGrid):
        grid_search("decision_tree", {"max_depth": []}, ds, FAST_CV)


# --- forward SFS -----------------------------------------------------------------

def test_sfs_picks_informative_feature_first():
    ds = make_blobs(seed=9, n_per=15, centers=((0,), (6,), (12,)), n_features=4)
    traj = forward_sfs("decision_tree", {"max_depth": 4}, ds, FAST_CV)
    assert traj.steps[0][0] == "f0"
    assert len(traj.steps) == 4
    # trajectory sets are nested
    for a, b in zip(traj.steps, traj.steps[1:]):
        assert set(a[1]) < set(b[1])


def test_sfs_chooses_global_max_smallest_set():
    ds = make_blobs(seed=10, n_per=15, centers=((0,), (6,), (12,)), n_features=3)
    traj = forward_sfs("decision_tree", {"max_depth": 4}, ds, FAST_CV)
    best = max(s[2] for s in traj.steps)
    assert traj.chosen_score == best
    ties = [s for s in traj.steps if s[2] == best]
    assert len(traj.chosen) == min(len(s[1]) for s in ties)

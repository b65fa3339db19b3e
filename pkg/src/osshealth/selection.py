"""Stratified splitting, repeated stratified k-fold CV, grid search, and
forward sequential feature selection."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import Dataset
from .errors import ClassTooSmall, EmptyGrid, KTooLarge, OssHealthError
from .learners import (
    BoostingParams,
    ForestParams,
    TreeParams,
    train_decision_tree,
    train_gradient_boosting,
    train_random_forest,
    train_svm_rbf,
)
from .resample import smote_tomek


def train_family(family: str, ds: Dataset, hp: dict, seed: int):
    if family == "decision_tree":
        return train_decision_tree(ds, TreeParams(**hp), seed=seed)
    if family == "random_forest":
        return train_random_forest(ds, ForestParams(**hp), seed=seed)
    if family == "gradient_boosting":
        return train_gradient_boosting(ds, BoostingParams(**hp), seed=seed)
    if family == "svm_rbf":
        return train_svm_rbf(ds, seed=seed, **hp)
    raise OssHealthError(f"unknown learner family {family!r}")


# Simpler-first orderings used to break grid-search ties.
def _complexity_key(family: str, hp: dict):
    inf = float("inf")
    if family == "decision_tree":
        return (
            hp.get("max_depth") or inf,
            hp.get("max_leaf_nodes") or inf,
            -hp.get("ccp_alpha", 0.0),
            -hp.get("min_samples_leaf", 1),
            -hp.get("min_samples_split", 2),
        )
    if family == "random_forest":
        return (hp.get("n_trees", 100), hp.get("max_depth") or inf,
                -hp.get("min_samples_leaf", 1))
    if family == "gradient_boosting":
        return (hp.get("n_stages", 100), hp.get("max_depth", 3),
                hp.get("learning_rate", 0.1))
    if family == "svm_rbf":
        return (hp.get("C", 1.0), hp.get("gamma", 1.0))
    return ()


@dataclass
class CvSpec:
    k: int = 10
    repeats: int = 10
    seed: int = 0
    scoring: str = "accuracy"
    smote_k: int = 5
    resample: bool = True

    def validate(self):
        if self.k < 2:
            raise OssHealthError("k must be >= 2")
        if self.repeats < 1:
            raise OssHealthError("repeats must be >= 1")
        if self.scoring not in ("accuracy", "macro_f1"):
            raise OssHealthError(f"unknown scoring {self.scoring!r}")


@dataclass
class GridResult:
    combinations: list  # of {"params", "mean", "std", "scores"}
    best_index: int
    selection_rule: str

    @property
    def best_params(self) -> dict:
        return self.combinations[self.best_index]["params"]


@dataclass
class SfsTrajectory:
    steps: list  # of (added_feature, cumulative tuple of features, mean score)
    chosen: list

    @property
    def chosen_score(self) -> float:
        sets = {tuple(s[1]): s[2] for s in self.steps}
        return sets[tuple(self.chosen)]


def stratified_split(ds: Dataset, test_fraction: float, seed: int = 0):
    """Disjoint, exhaustive (train, test) with per-class test counts by
    the largest-remainder method against round(test_fraction * n)."""
    if not 0.0 < test_fraction < 1.0:
        raise OssHealthError("test_fraction must be in (0, 1)")
    ds.require_labels()
    counts = ds.class_counts()
    for code, c in counts.items():
        if c < 2:
            raise ClassTooSmall(f"class {code} has {c} row(s); need >= 2 to split")
    n = ds.n_rows
    total_test = int(round(test_fraction * n))
    quotas = {code: c * total_test / n for code, c in counts.items()}
    take = {code: int(np.floor(q)) for code, q in quotas.items()}
    deficit = total_test - sum(take.values())
    # hand out the shortfall by largest fractional remainder, low code first
    order = sorted(counts, key=lambda c: (-(quotas[c] - take[c]), c))
    for code in order[:deficit]:
        take[code] += 1

    rng = np.random.default_rng(seed)
    test_idx = []
    for code in sorted(counts):
        class_rows = np.flatnonzero(ds.y == code)
        shuffled = class_rows[rng.permutation(len(class_rows))]
        test_idx.extend(int(i) for i in shuffled[: take[code]])
    test_set = set(test_idx)
    train_idx = [i for i in range(n) if i not in test_set]
    return ds.take(train_idx), ds.take(sorted(test_idx))


def stratified_kfold(y, k: int, seed: int = 0) -> np.ndarray:
    """Fold id per row: per class, seeded shuffle then round-robin deal."""
    if k < 2:
        raise OssHealthError("k must be >= 2")
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(y), dtype=np.int64)
    for code in sorted(set(int(v) for v in y)):
        class_rows = np.flatnonzero(y == code)
        if len(class_rows) < k:
            warnings.warn(
                f"class {code} has {len(class_rows)} rows < k={k}; "
                "some folds will lack it",
                KTooLarge,
            )
        shuffled = class_rows[rng.permutation(len(class_rows))]
        for pos, row in enumerate(shuffled):
            assignment[row] = pos % k
    return assignment


def _accuracy(y_true, y_pred) -> float:
    return float(np.mean(np.asarray(y_true) == np.asarray(y_pred)))


def _macro_f1(y_true, y_pred) -> float:
    from .evaluate import classification_report, confusion_matrix

    labels = sorted(set(int(v) for v in y_true) | set(int(v) for v in y_pred))
    report = classification_report(confusion_matrix(y_true, y_pred, labels))
    return report.macro_f1


def _score(scoring, y_true, y_pred) -> float:
    return _accuracy(y_true, y_pred) if scoring == "accuracy" else _macro_f1(y_true, y_pred)


def cross_val_score(family: str, hp: dict, ds: Dataset, cv: CvSpec,
                    fold_hook=None) -> list:
    """k * repeats held-out scores, deterministic order (repeat-major).

    Resampling happens strictly inside the training folds. fold_hook is a
    test seam: fold_hook(X_train, y_train, X_test, y_test) -> (X_train,
    X_test) runs right before fitting (used by the leakage canary).
    """
    cv.validate()
    ds.require_labels()
    scores = []
    for repeat in range(cv.repeats):
        repeat_seed = cv.seed + repeat
        folds = stratified_kfold(ds.y, cv.k, seed=repeat_seed)
        for fold in range(cv.k):
            test_idx = np.flatnonzero(folds == fold)
            train_idx = np.flatnonzero(folds != fold)
            if len(test_idx) == 0:
                scores.append(float("nan"))
                continue
            train_ds = ds.take(train_idx)
            test_X = ds.X[test_idx]
            test_y = ds.y[test_idx]
            try:
                if cv.resample:
                    train_ds = smote_tomek(train_ds, k=cv.smote_k, seed=repeat_seed)
                fit_X, fit_y = train_ds.X, train_ds.y
                if fold_hook is not None:
                    fit_X, test_X = fold_hook(fit_X, fit_y, test_X, test_y)
                    train_ds = Dataset(
                        X=fit_X, y=fit_y,
                        column_names=list(train_ds.column_names)
                        + [f"hook_{i}" for i in range(fit_X.shape[1] - len(train_ds.column_names))],
                        row_ids=list(train_ds.row_ids),
                    )
                model = train_family(family, train_ds, hp, seed=repeat_seed)
                pred = model.predict(test_X)
            except OssHealthError as exc:
                raise type(exc)(f"(repeat={repeat}, fold={fold}) {exc}") from exc
            scores.append(_score(cv.scoring, test_y, pred))
    return scores


def _expand_grid(grid: dict) -> list:
    keys = list(grid.keys())
    combos = []
    seen = set()
    for values in itertools.product(*(grid[k] for k in keys)):
        hp = dict(zip(keys, values))
        fingerprint = tuple(sorted(hp.items()))
        if fingerprint in seen:  # the duplicate collapse
            continue
        seen.add(fingerprint)
        combos.append(hp)
    return combos


def grid_search(family: str, grid: dict, ds: Dataset, cv: CvSpec) -> GridResult:
    """Full Cartesian grid scored by repeated CV; best = highest mean,
    ties to the simpler configuration, then grid order."""
    combos = _expand_grid(grid)
    if not combos:
        raise EmptyGrid("grid has no combinations after duplicate collapse")
    results = []
    for hp in combos:
        scores = cross_val_score(family, hp, ds, cv)
        arr = np.asarray(scores, dtype=np.float64)
        results.append({
            "params": hp,
            "mean": float(np.nanmean(arr)),
            "std": float(np.nanstd(arr)),
            "scores": scores,
        })
    best = 0
    for i in range(1, len(results)):
        a, b = results[i], results[best]
        if a["mean"] > b["mean"] or (
            a["mean"] == b["mean"]
            and _complexity_key(family, a["params"]) < _complexity_key(family, b["params"])
        ):
            best = i
    return GridResult(
        combinations=results,
        best_index=best,
        selection_rule="max mean score; ties: lower complexity, then grid order",
    )


def forward_sfs(family: str, hp: dict, ds: Dataset, cv: CvSpec) -> SfsTrajectory:
    """Greedy forward selection over the full trajectory; the chosen set
    is the global score maximum (smallest set, then earliest, on ties)."""
    if not ds.column_names:
        raise OssHealthError("dataset has no features")
    remaining = list(ds.column_names)
    current: list = []
    steps = []
    while remaining:
        best_feature, best_score = None, None
        for feature in remaining:  # canonical order => lower index wins ties
            candidate = current + [feature]
            scores = cross_val_score(family, hp, ds.select_columns(candidate), cv)
            mean = float(np.nanmean(np.asarray(scores, dtype=np.float64)))
            if best_score is None or mean > best_score:
                best_feature, best_score = feature, mean
        current = current + [best_feature]
        remaining.remove(best_feature)
        steps.append((best_feature, tuple(current), best_score))
    best_step = max(
        range(len(steps)),
        key=lambda i: (steps[i][2], -len(steps[i][1]), -i),
    )
    return SfsTrajectory(steps=steps, chosen=list(steps[best_step][1]))


def finalize(family: str, best_hp: dict, chosen_features: list, train: Dataset,
             seed: int = 0, smote_k: int = 5, resample: bool = True):
    """Resample the full training set, restrict to the chosen features,
    and fit the final model. Returns (model, provenance dict)."""
    work = train.select_columns(chosen_features)
    if resample:
        work = smote_tomek(work, k=smote_k, seed=seed)
    model = train_family(family, work, best_hp, seed=seed)
    provenance = {
        "family": family,
        "hyperparams": best_hp,
        "selected_features": list(chosen_features),
        "seed": seed,
        "smote_k": smote_k,
        "resampled": resample,
        "training_rows": work.n_rows,
    }
    return model, provenance

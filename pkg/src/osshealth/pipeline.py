"""End-to-end orchestration: impute -> per-class outlier filter ->
stratified split -> per-family grid search -> forward selection ->
finalize -> evaluate -> interpret."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset
from .diagnostics import ridgeline_series
from .errors import ClassTooSmall, MissingFeatureColumn, OssHealthError
from .evaluate import classification_report, confusion_matrix, render_report
from .features import CANONICAL_METRICS, LifecycleStage
from .learners import load_model, save_model
from .outliers import DEFAULT_CONTAMINATION, filter_class_outliers
from .plotting import render_ridgeline_svg, write_ridgeline_csv
from .selection import CvSpec, finalize, forward_sfs, grid_search, stratified_split

# Hyperparameter grids used when the configuration file does not override
# them. Duplicate grid entries collapse during expansion.
DEFAULT_GRIDS = {
    "decision_tree": {
        "max_depth": [3, 5, 7, 10, 15],
        "min_samples_split": [2, 5, 10],
        "min_samples_leaf": [1, 2, 5, 10],
        "max_leaf_nodes": [None, 10, 20, 50],
        "ccp_alpha": [0.0, 0.0001, 0.001, 0.01],
    },
    "random_forest": {
        "n_trees": [50, 100, 200],
        "max_depth": [5, 10, 15],
        "min_samples_leaf": [1, 2, 5],
    },
    "gradient_boosting": {
        "learning_rate": [0.001, 0.01, 0.1],
        "max_depth": [3, 5, 7],
        "n_stages": [50, 100, 200],
    },
    "svm_rbf": {
        "C": [0.001, 0.001, 0.1, 1.0, 10.0, 100.0],
        "gamma": [0.001, 0.01, 0.1, 1.0, 10.0],
    },
}

# Tie-break order for "computational efficiency": cheaper first.
FAMILY_COST_ORDER = ["decision_tree", "random_forest", "gradient_boosting", "svm_rbf"]


@dataclass
class RunConfig:
    seed: int = 0
    test_fraction: float = 0.2
    recency_days: int = 365
    smote_k: int = 5
    contamination: dict = field(default_factory=lambda: dict(DEFAULT_CONTAMINATION))
    cv: CvSpec = field(default_factory=lambda: CvSpec(k=10, repeats=10))
    grids: dict = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULT_GRIDS.items()})
    families: list = field(default_factory=lambda: list(FAMILY_COST_ORDER))
    tie_epsilon: float = 0.005
    n_trees_outliers: int = 100
    jobs: int = 1

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "test_fraction": self.test_fraction,
            "recency_days": self.recency_days,
            "smote_k": self.smote_k,
            "contamination": {
                LifecycleStage(k).slug(): v for k, v in self.contamination.items()
            },
            "cv": {"k": self.cv.k, "repeats": self.cv.repeats,
                   "seed": self.cv.seed, "scoring": self.cv.scoring},
            "grids": self.grids,
            "families": self.families,
            "tie_epsilon": self.tie_epsilon,
            "n_trees_outliers": self.n_trees_outliers,
            "jobs": self.jobs,
        }


def impute_zeros(table):
    """Replace every missing (NaN) cell with 0.0."""
    table = np.array(table, dtype=np.float64)
    table[np.isnan(table)] = 0.0
    return table


@dataclass
class RunManifest:
    config: dict
    stage_counts: dict
    family_results: dict
    chosen_family: str
    chosen_hyperparams: dict
    chosen_features: list
    report: dict
    importance: dict
    artifacts: dict
    timings_seconds: dict

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "stage_counts": self.stage_counts,
            "family_results": self.family_results,
            "chosen_family": self.chosen_family,
            "chosen_hyperparams": self.chosen_hyperparams,
            "chosen_features": self.chosen_features,
            "report": self.report,
            "importance": self.importance,
            "artifacts": self.artifacts,
            "timings_seconds": self.timings_seconds,
        }


def _family_cost(family: str) -> int:
    return FAMILY_COST_ORDER.index(family)


def run_training(config: RunConfig, corpus: Dataset, out_dir) -> RunManifest:
    """Execute the full training pipeline and persist every artifact.

    Family selection: highest test accuracy wins; families within
    tie_epsilon of the best are tied and resolved toward the
    computationally cheaper one (tree < forest < boosting < svm).
    """
    out = Path(out_dir)
    timings = {}
    stage_counts = {"input": corpus.n_rows}
    cv = CvSpec(k=config.cv.k, repeats=config.cv.repeats, seed=config.seed,
                scoring=config.cv.scoring, smote_k=config.smote_k)

    def timed(stage, fn):
        start = time.perf_counter()
        try:
            result = fn()
        except OssHealthError as exc:
            raise type(exc)(f"[stage {stage}] {exc}") from exc
        timings[stage] = time.perf_counter() - start
        return result

    corpus = Dataset(X=impute_zeros(corpus.X), y=corpus.y,
                     column_names=corpus.column_names, row_ids=corpus.row_ids)

    filtered = timed("outlier_filter", lambda: filter_class_outliers(
        corpus, config.contamination, n_trees=config.n_trees_outliers,
        seed=config.seed,
    ))
    stage_counts["after_outlier_filter"] = filtered.n_rows
    stage_counts["per_class_after_filter"] = {
        LifecycleStage(k).slug(): v for k, v in filtered.class_counts().items()
    }

    for code, count in filtered.class_counts().items():
        if count < cv.k:
            raise ClassTooSmall(
                f"class {LifecycleStage(code).slug()} has {count} rows after "
                f"filtering; cross-validation needs at least k={cv.k}"
            )

    train_ds, test_ds = timed("split", lambda: stratified_split(
        filtered, config.test_fraction, seed=config.seed))
    stage_counts["train"] = train_ds.n_rows
    stage_counts["test"] = test_ds.n_rows

    family_results = {}
    fitted = {}
    for family in config.families:
        grid = config.grids[family]
        gr = timed(f"grid_search:{family}", lambda: grid_search(family, grid, train_ds, cv))
        best_hp = gr.best_params
        sfs = timed(f"sfs:{family}", lambda: forward_sfs(family, best_hp, train_ds, cv))
        model, provenance = timed(f"finalize:{family}", lambda: finalize(
            family, best_hp, sfs.chosen, train_ds, seed=config.seed,
            smote_k=config.smote_k,
        ))
        test_view = test_ds.select_columns(sfs.chosen)
        pred = model.predict(test_view.X)
        labels = sorted(set(int(v) for v in filtered.y))
        report = classification_report(confusion_matrix(test_ds.y, pred, labels))
        family_results[family] = {
            "best_hyperparams": best_hp,
            "cv_mean": gr.combinations[gr.best_index]["mean"],
            "selected_features": sfs.chosen,
            "sfs_trajectory": [
                {"added": s[0], "set_size": len(s[1]), "cv_mean": s[2]} for s in sfs.steps
            ],
            "test_accuracy": report.accuracy,
            "test_macro_f1": report.macro_f1,
            "test_weighted_f1": report.weighted_f1,
            "grid": gr,
            "provenance": provenance,
        }
        fitted[family] = (model, report, pred)

    best_accuracy = max(r["test_accuracy"] for r in family_results.values())
    tied = [f for f, r in family_results.items()
            if best_accuracy - r["test_accuracy"] <= config.tie_epsilon]
    chosen = min(tied, key=_family_cost)
    model, report, _ = fitted[chosen]
    chosen_result = family_results[chosen]

    importance = {}
    if hasattr(model, "feature_importance"):
        vec = model.feature_importance()
        importance = {
            name: float(v) for name, v in zip(chosen_result["selected_features"], vec)
        }

    series_list = timed("ridgeline", lambda: [
        ridgeline_series(
            {
                LifecycleStage(code): filtered.X[filtered.y == code,
                                                 filtered.column_names.index(name)]
                for code in sorted(set(int(v) for v in filtered.y))
            },
            feature=name,
        )
        for name in chosen_result["selected_features"]
    ])

    # ---- persist everything at once so a failed run leaves nothing ----
    out.mkdir(parents=True, exist_ok=True)
    artifacts = {}

    def artifact(name):
        artifacts[name] = str(out / name)
        return out / name

    save_model(model, artifact("model.json"),
               selected_features=chosen_result["selected_features"],
               provenance=chosen_result["provenance"])
    report_doc = report.to_dict()
    artifact("report.json").write_text(
        json.dumps(report_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    artifact("report.txt").write_text(render_report(report) + "\n", encoding="utf-8")

    with artifact("grid_scores.csv").open("w", encoding="utf-8", newline="") as fh:
        fh.write("family,combination_id,repeat,fold,score\n")
        for family, result in family_results.items():
            for combo_id, combo in enumerate(result["grid"].combinations):
                for run_idx, score in enumerate(combo["scores"]):
                    repeat, fold = divmod(run_idx, cv.k)
                    fh.write(f"{family},{combo_id},{repeat},{fold},{score!r}\n")

    with artifact("importance.csv").open("w", encoding="utf-8", newline="") as fh:
        fh.write("feature,importance\n")
        for name in sorted(importance, key=importance.get, reverse=True):
            fh.write(f"{name},{importance[name]!r}\n")

    write_ridgeline_csv(series_list, artifact("ridgeline.csv"))
    for series in series_list:
        render_ridgeline_svg(series, artifact(f"ridgeline_{series.feature}.svg"))

    for family, result in family_results.items():
        result.pop("grid")  # not JSON-serializable; per-run scores live in the CSV

    manifest = RunManifest(
        config=config.to_dict(),
        stage_counts=stage_counts,
        family_results=family_results,
        chosen_family=chosen,
        chosen_hyperparams=chosen_result["best_hyperparams"],
        chosen_features=chosen_result["selected_features"],
        report=report_doc,
        importance=importance,
        artifacts=artifacts,
        timings_seconds=timings,
    )
    (out / "manifest.json").write_text(
        json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    return manifest


def classify(model_path, matrix, column_names, row_ids):
    """Predict lifecycle stages for a feature table using a saved model.

    Extra columns are ignored; a missing selected feature is an error.
    Returns a list of result dicts in input row order.
    """
    model, doc = load_model(model_path)
    selected = doc.get("selected_features") or column_names
    missing = [f for f in selected if f not in column_names]
    if missing:
        raise MissingFeatureColumn(f"feature table lacks columns: {missing}")
    idx = [column_names.index(f) for f in selected]
    X = np.asarray(matrix, dtype=np.float64)[:, idx]
    preds = model.predict(X)
    probas = model.predict_proba(X) if hasattr(model, "predict_proba") else None
    results = []
    for i, repo in enumerate(row_ids):
        entry = {
            "repo_id": repo,
            "stage": LifecycleStage(int(preds[i])).slug(),
        }
        if probas is not None:
            entry["probabilities"] = {
                LifecycleStage(int(c)).slug(): float(p)
                for c, p in zip(model.classes, probas[i])
            }
        results.append(entry)
    return results

"""Command-line surface.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 runtime
failure. Diagnostics go to stderr; data goes to files or stdout.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from .data import dataset_from_table
from .diagnostics import ridgeline_series, summarize
from .errors import (
    AuthError,
    ConfigError,
    OssHealthError,
    PartialData,
    RateLimited,
    UnknownLabel,
)
from .evaluate import render_report, report_from_dict
from .features import (
    CANONICAL_METRICS,
    LifecycleStage,
    compute_features,
    features_to_table,
    read_feature_csv,
    write_feature_csv,
)
from .ingest import clip_window, fetch_project, load_archive, parse_timestamp
from .pipeline import classify, impute_zeros, run_training
from .plotting import (
    render_ridgeline_svg,
    render_spearman_heatmap_svg,
    write_ridgeline_csv,
)

USAGE_EXIT = 1
DATA_EXIT = 2
RUNTIME_EXIT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _build_parser() -> _Parser:
    parser = _Parser(prog="osshealth",
                     description="Project health metrics and lifecycle classification")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch", help="fetch one repository into an archive")
    p.add_argument("--base-url", required=True)
    p.add_argument("--repo", required=True, help="repository slug org/name")
    p.add_argument("--token-env", default="OSSHEALTH_TOKEN",
                   help="environment variable holding the bearer token (default: OSSHEALTH_TOKEN)")
    p.add_argument("--window-end", default=None, help="RFC 3339 cutoff timestamp")
    p.add_argument("--out", required=True, help="archive directory to write")

    p = sub.add_parser("ingest", help="validate an archive and write its canonical form")
    p.add_argument("--archive", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("features", help="compute the feature table for a corpus")
    p.add_argument("--corpus", required=True,
                   help="directory of archive subdirectories")
    p.add_argument("--window-end", default=None, help="RFC 3339 cutoff (default: archive value)")
    p.add_argument("--recency-days", type=int, default=365)
    p.add_argument("--out", required=True, help="feature CSV to write")

    p = sub.add_parser("train", help="run the full training pipeline")
    p.add_argument("--config", default=None, help="TOML run configuration")
    p.add_argument("--features", required=True, help="feature CSV")
    p.add_argument("--labels", default=None,
                   help="repo_id,label CSV joined onto the feature table")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed (default: 0)")
    p.add_argument("--jobs", type=int, default=None, help="parallelism cap (default: 1)")

    p = sub.add_parser("classify", help="predict lifecycle stages with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")

    p = sub.add_parser("report", help="render the classification report of a run")
    p.add_argument("--manifest", required=True)

    p = sub.add_parser("diagnose", help="exploratory statistics and ridgeline data")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", default=None)
    p.add_argument("--out-dir", required=True)
    return parser


def _load_table(features_path, labels_path=None):
    rows = read_feature_csv(features_path)
    if labels_path:
        labels = {}
        with Path(labels_path).open("r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[:2] != ["repo_id", "label"]:
                raise ConfigError(f"{labels_path}: expected header repo_id,label")
            for record in reader:
                labels[record[0]] = LifecycleStage.from_name(record[1])
        for row in rows:
            if row.repo_id in labels:
                row.label = labels[row.repo_id]
    return rows


def _cmd_fetch(args) -> int:
    token = os.environ.get(args.token_env, "")
    window_end = parse_timestamp(args.window_end) if args.window_end else None
    log = fetch_project(args.base_url, args.repo, token,
                        window_end=window_end, out_dir=args.out)
    print(f"fetched {log.repo_id}: {len(log.commits)} commits, "
          f"{len(log.pull_requests)} PRs, {len(log.issues)} issues",
          file=sys.stderr)
    return 0


def _cmd_ingest(args) -> int:
    from .ingest import write_archive

    log = load_archive(args.archive)
    write_archive(log, args.out)
    print(f"validated {log.repo_id}", file=sys.stderr)
    return 0


def _cmd_features(args) -> int:
    corpus = Path(args.corpus)
    window_end = parse_timestamp(args.window_end) if args.window_end else None
    rows = []
    for archive in sorted(p for p in corpus.iterdir() if p.is_dir()):
        log = load_archive(archive)
        if window_end is not None:
            log = clip_window(log, window_end)
        rows.append(compute_features(log, recency_days=args.recency_days))
    write_feature_csv(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}", file=sys.stderr)
    return 0


def _cmd_train(args) -> int:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if args.config:
        config = config_mod.load_config(args.config, overrides)
    else:
        config = config_mod.config_from_dict({}, overrides)
    rows = _load_table(args.features, args.labels)
    matrix, names, labels, row_ids = features_to_table(rows)
    if any(l is None for l in labels):
        unlabeled = [r for r, l in zip(row_ids, labels) if l is None]
        raise UnknownLabel(f"rows without labels: {unlabeled[:5]}")
    ds = dataset_from_table(impute_zeros(matrix), names, labels, row_ids)
    manifest = run_training(config, ds, args.out_dir)
    print(f"chosen family: {manifest.chosen_family}; "
          f"test accuracy {manifest.report['accuracy']:.4f}", file=sys.stderr)
    return 0


def _cmd_classify(args) -> int:
    rows = _load_table(args.features)
    matrix, names, _, row_ids = features_to_table(rows)
    results = classify(args.model, impute_zeros(matrix), names, row_ids)
    stages = [s.slug() for s in LifecycleStage]
    out_fh = Path(args.out).open("w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out_fh)
        writer.writerow(["repo_id", "stage", *(f"p_{s}" for s in stages)])
        for r in results:
            probs = r.get("probabilities", {})
            writer.writerow([r["repo_id"], r["stage"],
                             *(repr(probs[s]) if s in probs else "" for s in stages)])
    finally:
        if args.out:
            out_fh.close()
    return 0


def _cmd_report(args) -> int:
    doc = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    print(render_report(report_from_dict(doc["report"])))
    return 0


def _cmd_diagnose(args) -> int:
    rows = _load_table(args.features, args.labels)
    matrix, names, labels, row_ids = features_to_table(rows)
    matrix = impute_zeros(matrix)
    y = np.array([-1 if l is None else l for l in labels])
    labeled = y >= 0
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    summary = summarize(matrix, y[labeled] if labeled.any() else None, names)
    (out / "diagnostics.json").write_text(
        json.dumps(summary.to_dict(names), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    render_spearman_heatmap_svg(summary.spearman, names, out / "spearman.svg")

    if labeled.any():
        series_list = []
        for j, name in enumerate(names):
            values_by_class = {
                LifecycleStage(code): matrix[labeled & (y == code), j]
                for code in sorted(set(int(v) for v in y[labeled]))
            }
            if any(len(v) < 2 for v in values_by_class.values()):
                continue
            series = ridgeline_series(values_by_class, feature=name)
            series_list.append(series)
            render_ridgeline_svg(series, out / f"ridgeline_{name}.svg")
        write_ridgeline_csv(series_list, out / "ridgeline.csv")
    print(f"diagnostics written to {out}", file=sys.stderr)
    return 0


_COMMANDS = {
    "fetch": _cmd_fetch,
    "ingest": _cmd_ingest,
    "features": _cmd_features,
    "train": _cmd_train,
    "classify": _cmd_classify,
    "report": _cmd_report,
    "diagnose": _cmd_diagnose,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (AuthError, RateLimited, PartialData) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT
    except OssHealthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"internal error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())

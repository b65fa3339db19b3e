"""Project-health metrics computed from a ProjectEventLog.

All 21 canonical metrics are defined here; the column order below is the
stable order used by every table, CSV, and model in the package.
"""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ColumnMismatch, InvalidThreshold, UnknownLabel
from .ingest import IssueRecord, ProjectEventLog

HOUR = 3600.0

CANONICAL_METRICS = (
    "commits",
    "pr_count",
    "pr_total_files",
    "pr_average_commits",
    "pr_total_commits",
    "pr_total_comments",
    "pr_review_duration_in_hours",
    "total_issue_duration",
    "avg_comment_count_issue",
    "total_comment_count_issue",
    "comments_per_issue",
    "avg_ttfr_hours",
    "contributor_count",
    "new_contributor_count",
    "committer_count",
    "bus_factor",
    "release_count",
    "fork_count",
    "watchers_count",
    "stars_count",
    "dependency_count",
)


class LifecycleStage(IntEnum):
    SANDBOX = 0
    INCUBATING = 1
    GRADUATED = 2

    @classmethod
    def from_name(cls, name: str) -> "LifecycleStage":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise UnknownLabel(f"unknown lifecycle stage: {name!r}") from None

    def slug(self) -> str:
        return self.name.lower()


@dataclass
class FeatureVector:
    repo_id: str
    values: dict  # metric name -> float, in canonical order
    label: Optional[LifecycleStage] = None


def is_bot(identity: str) -> bool:
    return identity.lower().endswith("[bot]")


def _hours(delta) -> float:
    return delta.total_seconds() / HOUR


def bus_factor(author_commit_counts: dict, threshold: float = 0.5) -> int:
    """Smallest number of authors whose combined commit share reaches
    the threshold, taken greedily over descending counts."""
    if not 0.0 < threshold <= 1.0:
        raise InvalidThreshold(f"threshold must be in (0, 1], got {threshold}")
    if any(c < 0 for c in author_commit_counts.values()):
        raise InvalidThreshold("commit counts must be non-negative")
    total = sum(author_commit_counts.values())
    if total == 0:
        return 0
    needed = threshold * total
    covered = 0.0
    for i, count in enumerate(sorted(author_commit_counts.values(), reverse=True), 1):
        covered += count
        if covered >= needed - 1e-12:
            return i
    return len(author_commit_counts)


def _contribution_events(log: ProjectEventLog, include_bots: bool):
    """(identity, timestamp) for every authorship event in the log."""
    events = []
    for c in log.commits:
        events.append((c.author_id, c.authored_at))
    for pr in log.pull_requests:
        events.append((pr.author_id, pr.created_at))
        for group in (pr.comments, pr.reviews, pr.review_comments):
            events.extend(group)
    for issue in log.issues:
        events.append((issue.author_id, issue.created_at))
        events.extend(issue.comments)
    events = [(a.lower(), t) for a, t in events]
    if not include_bots:
        events = [(a, t) for a, t in events if not is_bot(a)]
    return events


def new_contributor_count(log: ProjectEventLog, recency_days: int = 365,
                          include_bots: bool = False) -> int:
    """Distinct identities whose first contribution falls inside the
    final recency_days of the observation window."""
    if recency_days <= 0:
        raise ValueError("recency_days must be positive")
    first_seen = {}
    for identity, ts in _contribution_events(log, include_bots):
        if identity not in first_seen or ts < first_seen[identity]:
            first_seen[identity] = ts
    cutoff_seconds = recency_days * 24 * HOUR
    return sum(
        1 for ts in first_seen.values()
        if (log.window_end - ts).total_seconds() <= cutoff_seconds
    )


def avg_time_to_first_response(issues) -> float:
    """Mean hours to the first non-author comment, over issues that have
    one; 0 when none qualify."""
    durations = []
    for issue in issues:
        author = issue.author_id.lower()
        responses = [t for a, t in issue.comments if a.lower() != author]
        if responses:
            durations.append(_hours(min(responses) - issue.created_at))
    return sum(durations) / len(durations) if durations else 0.0


def compute_features(log: ProjectEventLog, recency_days: int = 365,
                     bus_threshold: float = 0.5, include_bots: bool = False,
                     label: Optional[LifecycleStage] = None) -> FeatureVector:
    """Compute the canonical metric vector. Zero denominators yield 0."""
    prs = log.pull_requests
    issues = log.issues

    pr_count = len(prs)
    pr_total_files = sum(len(set(pr.files)) for pr in prs)
    pr_total_commits = sum(len(pr.commit_shas) for pr in prs)
    pr_average_commits = pr_total_commits / pr_count if pr_count else 0.0
    pr_total_comments = sum(len(pr.comments) + len(pr.review_comments) for pr in prs)
    closed_durations = [
        _hours(pr.closed_at - pr.created_at) for pr in prs if pr.closed_at is not None
    ]
    pr_review_duration = (
        sum(closed_durations) / len(closed_durations) if closed_durations else 0.0
    )

    total_issue_duration = sum(
        _hours((issue.closed_at or log.window_end) - issue.created_at) for issue in issues
    )
    total_comments = sum(len(issue.comments) for issue in issues)
    avg_comment_count = total_comments / len(issues) if issues else 0.0
    comments_per_issue = (
        float(statistics.median(len(issue.comments) for issue in issues)) if issues else 0.0
    )

    contributors = {a for a, _ in _contribution_events(log, include_bots)}
    commit_authors = [
        c.author_id.lower() for c in log.commits
        if include_bots or not is_bot(c.author_id)
    ]
    commit_counts: dict = {}
    for a in commit_authors:
        commit_counts[a] = commit_counts.get(a, 0) + 1

    values = {
        "commits": float(len(log.commits)),
        "pr_count": float(pr_count),
        "pr_total_files": float(pr_total_files),
        "pr_average_commits": pr_average_commits,
        "pr_total_commits": float(pr_total_commits),
        "pr_total_comments": float(pr_total_comments),
        "pr_review_duration_in_hours": pr_review_duration,
        "total_issue_duration": total_issue_duration,
        "avg_comment_count_issue": avg_comment_count,
        "total_comment_count_issue": float(total_comments),
        "comments_per_issue": comments_per_issue,
        "avg_ttfr_hours": avg_time_to_first_response(issues),
        "contributor_count": float(len(contributors)),
        "new_contributor_count": float(
            new_contributor_count(log, recency_days, include_bots)
        ),
        "committer_count": float(len(set(commit_authors))),
        "bus_factor": float(bus_factor(commit_counts, bus_threshold)),
        "release_count": float(len(log.releases)),
        "fork_count": float(log.fork_count),
        "watchers_count": float(log.watchers_count),
        "stars_count": float(log.stars_count),
        "dependency_count": float(len(log.dependencies)),
    }
    ordered = {name: values[name] for name in CANONICAL_METRICS}
    return FeatureVector(repo_id=log.repo_id, values=ordered, label=label)


def features_to_table(rows: list):
    """Dense matrix in canonical column order, plus names, labels, ids.

    Labels come back as int codes, or None where a row is unlabeled.
    """
    for row in rows:
        if tuple(row.values.keys()) != CANONICAL_METRICS:
            raise ColumnMismatch(
                f"row {row.repo_id}: metric set differs from the canonical order"
            )
    matrix = np.array(
        [[row.values[m] for m in CANONICAL_METRICS] for row in rows], dtype=np.float64
    ).reshape(len(rows), len(CANONICAL_METRICS))
    labels = [int(row.label) if row.label is not None else None for row in rows]
    row_ids = [row.repo_id for row in rows]
    return matrix, list(CANONICAL_METRICS), labels, row_ids


def write_feature_csv(rows: list, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["repo_id", *CANONICAL_METRICS, "label"])
        for row in rows:
            label = row.label.slug() if row.label is not None else ""
            writer.writerow([
                row.repo_id,
                *(repr(row.values[m]) for m in CANONICAL_METRICS),
                label,
            ])


def read_feature_csv(path) -> list:
    rows = []
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = ["repo_id", *CANONICAL_METRICS, "label"]
        if header != expected:
            raise ColumnMismatch(f"{path}: unexpected header {header}")
        for record in reader:
            repo_id, *metric_values, label = record
            values = {
                name: float(v) for name, v in zip(CANONICAL_METRICS, metric_values)
            }
            rows.append(FeatureVector(
                repo_id=repo_id,
                values=values,
                label=LifecycleStage.from_name(label) if label else None,
            ))
    return rows

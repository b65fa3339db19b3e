import json
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
import pytest

from osshealth.data import Dataset
from osshealth.ingest import (
    CommitRecord,
    IssueRecord,
    ProjectEventLog,
    PullRequestRecord,
    load_archive,
)

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def minirepo_path():
    return FIXTURES / "minirepo"


@pytest.fixture
def minirepo(minirepo_path):
    return load_archive(minirepo_path)


def ts(text: str) -> datetime:
    return datetime.fromisoformat(text.replace("Z", "+00:00"))


@pytest.fixture
def make_log():
    """Random-but-valid ProjectEventLog factory for round-trip tests."""

    def build(seed=0, n_commits=5, n_prs=3, n_issues=3):
        rng = np.random.default_rng(seed)
        start = ts("2023-01-01T00:00:00Z")
        end = ts("2023-12-31T00:00:00Z")
        span = (end - start).total_seconds()

        def when(lo=0.0, hi=1.0):
            return start + timedelta(seconds=float(rng.uniform(lo, hi) * span))

        authors = ["ann", "ben", "cia", "dee"]
        commits = tuple(
            CommitRecord(sha=f"sha{i}", author_id=str(rng.choice(authors)),
                         authored_at=when(), files_changed=int(rng.integers(0, 9)))
            for i in range(n_commits)
        )
        prs = []
        for i in range(n_prs):
            created = when(0.0, 0.5)
            closed = created + timedelta(hours=float(rng.uniform(1, 200)))
            open_pr = bool(rng.integers(2))
            prs.append(PullRequestRecord(
                number=i + 1,
                author_id=str(rng.choice(authors)),
                created_at=created,
                closed_at=None if open_pr else min(closed, end),
                merged=False if open_pr else bool(rng.integers(2)),
                files=tuple(f"f{j}.py" for j in range(int(rng.integers(1, 4)))),
                commit_shas=tuple(f"pr{i}c{j}" for j in range(int(rng.integers(1, 4)))),
                comments=tuple(
                    (str(rng.choice(authors)), min(created + timedelta(hours=float(h)), end))
                    for h in rng.uniform(0, 48, size=int(rng.integers(0, 3)))
                ),
                reviews=(),
                review_comments=(),
            ))
        issues = []
        for i in range(n_issues):
            created = when(0.0, 0.5)
            closed = created + timedelta(hours=float(rng.uniform(1, 500)))
            issues.append(IssueRecord(
                number=i + 1,
                author_id=str(rng.choice(authors)),
                created_at=created,
                closed_at=None if rng.integers(2) else min(closed, end),
                comments=tuple(
                    (str(rng.choice(authors)), min(created + timedelta(hours=float(h)), end))
                    for h in rng.uniform(0, 48, size=int(rng.integers(0, 4)))
                ),
            ))
        return ProjectEventLog(
            repo_id="acme/generated",
            window_start=start,
            window_end=end,
            commits=commits,
            pull_requests=tuple(prs),
            issues=tuple(issues),
            releases=tuple(when() for _ in range(int(rng.integers(0, 3)))),
            stars_count=int(rng.integers(0, 500)),
            fork_count=int(rng.integers(0, 100)),
            watchers_count=int(rng.integers(0, 100)),
            dependencies=tuple(f"dep{i}" for i in range(int(rng.integers(0, 5)))),
        )

    return build


def make_synthetic_corpus(seed=0, n_per=50):
    """150 synthetic projects in three stage-ordered clusters.

    Cluster means rise with maturity in new_contributor_count,
    stars_count, pr_average_commits, and dependency_count; the other
    metrics carry correlated but noisier signals.
    """
    from osshealth.features import CANONICAL_METRICS, FeatureVector, LifecycleStage

    rng = np.random.default_rng(seed)
    stage_means = {
        LifecycleStage.SANDBOX: {
            "new_contributor_count": 3, "stars_count": 40,
            "pr_average_commits": 1.2, "dependency_count": 4,
        },
        LifecycleStage.INCUBATING: {
            "new_contributor_count": 14, "stars_count": 600,
            "pr_average_commits": 2.8, "dependency_count": 14,
        },
        LifecycleStage.GRADUATED: {
            "new_contributor_count": 45, "stars_count": 6000,
            "pr_average_commits": 5.5, "dependency_count": 40,
        },
    }
    rows = []
    for stage in (LifecycleStage.SANDBOX, LifecycleStage.INCUBATING,
                  LifecycleStage.GRADUATED):
        means = stage_means[stage]
        scale = 1.0 + int(stage)  # larger projects, larger spread
        for i in range(n_per):
            values = {}
            for name, mean in means.items():
                values[name] = max(0.0, rng.normal(mean, mean * 0.18))
            base = means["new_contributor_count"]
            defaults = {
                "commits": base * 20, "pr_count": base * 4,
                "pr_total_files": base * 12, "pr_total_commits": base * 9,
                "pr_total_comments": base * 6,
                "pr_review_duration_in_hours": 20.0 + 8 * scale,
                "total_issue_duration": base * 300.0,
                "avg_comment_count_issue": 1.0 + scale,
                "total_comment_count_issue": base * 8,
                "comments_per_issue": 1.0 + scale,
                "avg_ttfr_hours": 40.0 / scale,
                "contributor_count": base * 2, "committer_count": base,
                "bus_factor": 1.0 + scale, "release_count": 2.0 * scale,
                "fork_count": means["stars_count"] / 8,
                "watchers_count": means["stars_count"] / 10,
            }
            for name, mean in defaults.items():
                values[name] = max(0.0, rng.normal(mean, abs(mean) * 0.35 + 0.5))
            ordered = {name: float(values[name]) for name in CANONICAL_METRICS}
            rows.append(FeatureVector(
                repo_id=f"synth/{stage.slug()}-{i:03d}", values=ordered, label=stage,
            ))
    return rows


def make_blobs(seed=0, centers=((0, 0), (6, 6), (12, 0)), n_per=20, scale=0.5,
               n_features=None):
    """Well-separated Gaussian clusters; returns a labeled Dataset."""
    rng = np.random.default_rng(seed)
    rows, labels = [], []
    for code, center in enumerate(centers):
        center = np.asarray(center, dtype=float)
        pts = rng.normal(loc=center, scale=scale, size=(n_per, len(center)))
        rows.append(pts)
        labels.extend([code] * n_per)
    X = np.vstack(rows)
    if n_features is not None and n_features > X.shape[1]:
        pad = rng.normal(size=(len(X), n_features - X.shape[1]))
        X = np.hstack([X, pad])
    names = [f"f{i}" for i in range(X.shape[1])]
    ids = [f"row{i}" for i in range(len(X))]
    return Dataset(X=X, y=np.array(labels), column_names=names, row_ids=ids)

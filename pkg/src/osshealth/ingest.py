"""Reading, fetching, and validating per-repository event archives.

An archive is a directory with `meta.json`, `commits.jsonl`,
`pull_requests.jsonl`, `issues.jsonl`, `releases.jsonl` (one RFC 3339
timestamp per line) and `dependencies.txt` (one identifier per line).
"""

from __future__ import annotations

import json
import shutil
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import requests

from .errors import (
    AuthError,
    InvariantViolation,
    MissingFile,
    PartialData,
    RateLimited,
    SchemaError,
)

REQUIRED_FILES = (
    "meta.json",
    "commits.jsonl",
    "pull_requests.jsonl",
    "issues.jsonl",
    "releases.jsonl",
    "dependencies.txt",
)


def parse_timestamp(value: str) -> datetime:
    """Parse an RFC 3339 UTC timestamp."""
    if not isinstance(value, str):
        raise ValueError(f"timestamp must be a string, got {value!r}")
    text = value.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        raise ValueError(f"timestamp {value!r} lacks a timezone")
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    dt = dt.astimezone(timezone.utc)
    if dt.microsecond:
        return dt.strftime("%Y-%m-%dT%H:%M:%S.%f") + "Z"
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class CommitRecord:
    sha: str
    author_id: str
    authored_at: datetime
    files_changed: int


@dataclass(frozen=True)
class PullRequestRecord:
    number: int
    author_id: str
    created_at: datetime
    closed_at: Optional[datetime]
    merged: bool
    files: tuple
    commit_shas: tuple
    comments: tuple  # of (author_id, timestamp)
    reviews: tuple
    review_comments: tuple


@dataclass(frozen=True)
class IssueRecord:
    number: int
    author_id: str
    created_at: datetime
    closed_at: Optional[datetime]
    comments: tuple  # of (author_id, timestamp)


@dataclass(frozen=True)
class ProjectEventLog:
    repo_id: str
    window_start: datetime
    window_end: datetime
    commits: tuple = ()
    pull_requests: tuple = ()
    issues: tuple = ()
    releases: tuple = ()
    stars_count: int = 0
    fork_count: int = 0
    watchers_count: int = 0
    dependencies: tuple = ()


def _pairs(raw, where: str) -> tuple:
    out = []
    for item in raw:
        try:
            out.append((str(item["author_id"]), parse_timestamp(item["timestamp"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{where}: bad author/timestamp pair: {exc}") from exc
    return tuple(out)


def _read_jsonl(path: Path):
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise MissingFile(str(path)) from None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            yield lineno, json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{lineno}: invalid JSON: {exc}") from exc


def _parse_commit(row, where: str) -> CommitRecord:
    try:
        return CommitRecord(
            sha=str(row["sha"]),
            author_id=str(row["author_id"]),
            authored_at=parse_timestamp(row["authored_at"]),
            files_changed=int(row["files_changed"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: {exc}") from exc


def _parse_pr(row, where: str) -> PullRequestRecord:
    try:
        closed = row.get("closed_at")
        return PullRequestRecord(
            number=int(row["number"]),
            author_id=str(row["author_id"]),
            created_at=parse_timestamp(row["created_at"]),
            closed_at=parse_timestamp(closed) if closed else None,
            merged=bool(row["merged"]),
            files=tuple(str(f) for f in row.get("files", [])),
            commit_shas=tuple(str(s) for s in row.get("commit_shas", [])),
            comments=_pairs(row.get("comments", []), where),
            reviews=_pairs(row.get("reviews", []), where),
            review_comments=_pairs(row.get("review_comments", []), where),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: {exc}") from exc


def _parse_issue(row, where: str) -> IssueRecord:
    try:
        closed = row.get("closed_at")
        return IssueRecord(
            number=int(row["number"]),
            author_id=str(row["author_id"]),
            created_at=parse_timestamp(row["created_at"]),
            closed_at=parse_timestamp(closed) if closed else None,
            comments=_pairs(row.get("comments", []), where),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: {exc}") from exc


def load_archive(path) -> ProjectEventLog:
    """Read the canonical archive layout and return a validated log."""
    root = Path(path)
    meta_path = root / "meta.json"
    if not meta_path.exists():
        raise MissingFile(str(meta_path))
    for name in REQUIRED_FILES:
        if not (root / name).exists():
            raise MissingFile(str(root / name))
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{meta_path}: invalid JSON: {exc}") from exc

    commits = tuple(
        _parse_commit(row, f"commits.jsonl:{n}") for n, row in _read_jsonl(root / "commits.jsonl")
    )
    prs = tuple(
        _parse_pr(row, f"pull_requests.jsonl:{n}")
        for n, row in _read_jsonl(root / "pull_requests.jsonl")
    )
    issues = tuple(
        _parse_issue(row, f"issues.jsonl:{n}") for n, row in _read_jsonl(root / "issues.jsonl")
    )

    releases = []
    for lineno, line in enumerate((root / "releases.jsonl").read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        raw = line.strip()
        if raw.startswith('"'):
            raw = json.loads(raw)
        try:
            releases.append(parse_timestamp(raw))
        except ValueError as exc:
            raise SchemaError(f"releases.jsonl:{lineno}: {exc}") from exc

    deps = [
        line.strip()
        for line in (root / "dependencies.txt").read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]

    all_timestamps = _event_timestamps(commits, prs, issues, releases)
    try:
        window_end = (
            parse_timestamp(meta["window_end"])
            if meta.get("window_end")
            else max(all_timestamps, default=None)
        )
        window_start = (
            parse_timestamp(meta["window_start"])
            if meta.get("window_start")
            else min(all_timestamps, default=None)
        )
        if window_end is None or window_start is None:
            raise SchemaError(f"{meta_path}: window bounds absent and no events to infer them")
        log = ProjectEventLog(
            repo_id=str(meta["repo_id"]),
            window_start=window_start,
            window_end=window_end,
            commits=commits,
            pull_requests=prs,
            issues=issues,
            releases=tuple(releases),
            stars_count=int(meta.get("stars_count", 0)),
            fork_count=int(meta.get("fork_count", 0)),
            watchers_count=int(meta.get("watchers_count", 0)),
            dependencies=tuple(deps),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{meta_path}: {exc}") from exc

    violations = validate_log(log)
    if violations:
        raise InvariantViolation("; ".join(violations))
    return log


def _event_timestamps(commits, prs, issues, releases):
    ts = [c.authored_at for c in commits]
    for pr in prs:
        ts.append(pr.created_at)
        if pr.closed_at:
            ts.append(pr.closed_at)
        for group in (pr.comments, pr.reviews, pr.review_comments):
            ts.extend(t for _, t in group)
    for issue in issues:
        ts.append(issue.created_at)
        if issue.closed_at:
            ts.append(issue.closed_at)
        ts.extend(t for _, t in issue.comments)
    ts.extend(releases)
    return ts


def validate_log(log: ProjectEventLog) -> list[str]:
    """Return violation descriptions; empty iff all invariants hold."""
    v = []
    if not log.repo_id:
        v.append("repo_id empty")
    if log.window_start > log.window_end:
        v.append("window_start after window_end")
    for name in ("stars_count", "fork_count", "watchers_count"):
        if getattr(log, name) < 0:
            v.append(f"{name} negative")

    def in_window(ts):
        return log.window_start <= ts <= log.window_end

    seen_shas = set()
    for c in log.commits:
        if c.sha in seen_shas:
            v.append(f"commit sha duplicated: {c.sha}")
        seen_shas.add(c.sha)
        if not c.author_id:
            v.append(f"commit {c.sha}: author_id empty")
        if c.files_changed < 0:
            v.append(f"commit {c.sha}: files_changed negative")
        if not in_window(c.authored_at):
            v.append(f"commit {c.sha}: authored_at outside window")

    for pr in log.pull_requests:
        key = f"pull request {pr.number}"
        if pr.number <= 0:
            v.append(f"{key}: number not positive")
        if pr.closed_at is not None and pr.closed_at < pr.created_at:
            v.append(f"{key}: closed before created")
        if pr.merged and pr.closed_at is None:
            v.append(f"{key}: merged but not closed")
        if not in_window(pr.created_at):
            v.append(f"{key}: created_at outside window")
        if pr.closed_at is not None and not in_window(pr.closed_at):
            v.append(f"{key}: closed_at outside window")
        for label, group in (
            ("comment", pr.comments),
            ("review", pr.reviews),
            ("review comment", pr.review_comments),
        ):
            for _, ts in group:
                if not in_window(ts):
                    v.append(f"{key}: {label} timestamp outside window")

    for issue in log.issues:
        key = f"issue {issue.number}"
        if issue.number <= 0:
            v.append(f"{key}: number not positive")
        if issue.closed_at is not None and issue.closed_at < issue.created_at:
            v.append(f"{key}: closed before created")
        if not in_window(issue.created_at):
            v.append(f"{key}: created_at outside window")
        if issue.closed_at is not None and not in_window(issue.closed_at):
            v.append(f"{key}: closed_at outside window")
        for _, ts in issue.comments:
            if ts < issue.created_at:
                v.append(f"{key}: comment before creation")
            if not in_window(ts):
                v.append(f"{key}: comment timestamp outside window")

    for ts in log.releases:
        if not in_window(ts):
            v.append("release timestamp outside window")

    normalized = [d.lower() for d in log.dependencies]
    if len(set(normalized)) != len(normalized):
        v.append("dependency identifiers not distinct after case normalization")
    return v


def write_archive(log: ProjectEventLog, path) -> None:
    """Write the canonical archive layout (inverse of load_archive)."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    meta = {
        "repo_id": log.repo_id,
        "window_start": format_timestamp(log.window_start),
        "window_end": format_timestamp(log.window_end),
        "stars_count": log.stars_count,
        "fork_count": log.fork_count,
        "watchers_count": log.watchers_count,
    }
    (root / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")

    def pairs(group):
        return [{"author_id": a, "timestamp": format_timestamp(t)} for a, t in group]

    with (root / "commits.jsonl").open("w", encoding="utf-8") as fh:
        for c in log.commits:
            fh.write(json.dumps({
                "sha": c.sha,
                "author_id": c.author_id,
                "authored_at": format_timestamp(c.authored_at),
                "files_changed": c.files_changed,
            }) + "\n")
    with (root / "pull_requests.jsonl").open("w", encoding="utf-8") as fh:
        for pr in log.pull_requests:
            fh.write(json.dumps({
                "number": pr.number,
                "author_id": pr.author_id,
                "created_at": format_timestamp(pr.created_at),
                "closed_at": format_timestamp(pr.closed_at) if pr.closed_at else None,
                "merged": pr.merged,
                "files": list(pr.files),
                "commit_shas": list(pr.commit_shas),
                "comments": pairs(pr.comments),
                "reviews": pairs(pr.reviews),
                "review_comments": pairs(pr.review_comments),
            }) + "\n")
    with (root / "issues.jsonl").open("w", encoding="utf-8") as fh:
        for issue in log.issues:
            fh.write(json.dumps({
                "number": issue.number,
                "author_id": issue.author_id,
                "created_at": format_timestamp(issue.created_at),
                "closed_at": format_timestamp(issue.closed_at) if issue.closed_at else None,
                "comments": pairs(issue.comments),
            }) + "\n")
    with (root / "releases.jsonl").open("w", encoding="utf-8") as fh:
        for ts in log.releases:
            fh.write(json.dumps(format_timestamp(ts)) + "\n")
    (root / "dependencies.txt").write_text(
        "".join(d + "\n" for d in log.dependencies), encoding="utf-8"
    )


def clip_window(log: ProjectEventLog, window_end: datetime) -> ProjectEventLog:
    """Shrink the observation window, dropping events beyond the new end
    (fixed cutoff dates make reanalysis reproducible)."""
    def keep_pairs(group):
        return tuple((a, t) for a, t in group if t <= window_end)

    prs = tuple(
        PullRequestRecord(
            number=pr.number, author_id=pr.author_id, created_at=pr.created_at,
            closed_at=pr.closed_at if pr.closed_at and pr.closed_at <= window_end else None,
            merged=pr.merged and pr.closed_at is not None and pr.closed_at <= window_end,
            files=pr.files, commit_shas=pr.commit_shas,
            comments=keep_pairs(pr.comments), reviews=keep_pairs(pr.reviews),
            review_comments=keep_pairs(pr.review_comments),
        )
        for pr in log.pull_requests if pr.created_at <= window_end
    )
    issues = tuple(
        IssueRecord(
            number=i.number, author_id=i.author_id, created_at=i.created_at,
            closed_at=i.closed_at if i.closed_at and i.closed_at <= window_end else None,
            comments=keep_pairs(i.comments),
        )
        for i in log.issues if i.created_at <= window_end
    )
    return ProjectEventLog(
        repo_id=log.repo_id,
        window_start=min(log.window_start, window_end),
        window_end=window_end,
        commits=tuple(c for c in log.commits if c.authored_at <= window_end),
        pull_requests=prs,
        issues=issues,
        releases=tuple(t for t in log.releases if t <= window_end),
        stars_count=log.stars_count,
        fork_count=log.fork_count,
        watchers_count=log.watchers_count,
        dependencies=log.dependencies,
    )


class ArchiveFetcher:
    """Pages a hosting-platform HTTP API into a canonical archive.

    Endpoints, all under `{base_url}/repos/{repo_id}`:
      `/meta`, `/commits?page=N`, `/pull_requests?page=N`,
      `/issues?page=N`, `/releases?page=N` (empty page ends pagination),
      `/dependencies`. Auth via bearer token header.
    """

    MAX_RETRIES = 5

    def __init__(self, base_url: str, auth_token: str = "", backoff_base: float = 0.5,
                 session=None):
        self.base_url = base_url.rstrip("/")
        self.auth_token = auth_token
        self.backoff_base = backoff_base
        self.session = session or requests.Session()

    def _get(self, path: str, params=None):
        headers = {}
        if self.auth_token:
            headers["Authorization"] = f"Bearer {self.auth_token}"
        url = f"{self.base_url}{path}"
        last = None
        for attempt in range(self.MAX_RETRIES + 1):
            resp = self.session.get(url, params=params, headers=headers, timeout=30)
            if resp.status_code in (401, 403):
                raise AuthError(f"{url}: HTTP {resp.status_code}")
            if resp.status_code == 429 or resp.status_code >= 500:
                last = resp
                if attempt < self.MAX_RETRIES:
                    time.sleep(self.backoff_base * (2 ** attempt))
                continue
            resp.raise_for_status()
            return resp.json()
        if last is not None and last.status_code == 429:
            raise RateLimited(last.headers.get("Retry-After"))
        raise PartialData(f"{url}: HTTP {last.status_code} after {self.MAX_RETRIES} retries")

    def _paged(self, path: str):
        page = 1
        while True:
            rows = self._get(path, params={"page": page})
            if not rows:
                return
            yield from rows
            page += 1


def fetch_project(base_url: str, repo_id: str, auth_token: str, window_end=None,
                  out_dir=None, backoff_base: float = 0.5, session=None) -> ProjectEventLog:
    """Fetch a repository's events into an archive and load it back.

    Fetched and local data share one validation path: the archive is
    written first, then read via load_archive. On any mid-fetch failure
    the partial archive is removed and PartialData propagates.
    """
    if out_dir is None:
        raise ValueError("out_dir is required")
    out = Path(out_dir)
    fetcher = ArchiveFetcher(base_url, auth_token, backoff_base=backoff_base, session=session)
    prefix = f"/repos/{repo_id}"
    created = not out.exists()
    try:
        meta = fetcher._get(f"{prefix}/meta")
        commits = [_parse_commit(r, "commits") for r in fetcher._paged(f"{prefix}/commits")]
        prs = [_parse_pr(r, "pull_requests") for r in fetcher._paged(f"{prefix}/pull_requests")]
        issues = [_parse_issue(r, "issues") for r in fetcher._paged(f"{prefix}/issues")]
        releases = [parse_timestamp(t) for t in fetcher._paged(f"{prefix}/releases")]
        deps = [str(d) for d in fetcher._get(f"{prefix}/dependencies")]

        all_ts = _event_timestamps(commits, prs, issues, releases)
        end = window_end or (
            parse_timestamp(meta["window_end"]) if meta.get("window_end")
            else max(all_ts, default=None)
        )
        start = (
            parse_timestamp(meta["window_start"]) if meta.get("window_start")
            else min(all_ts, default=end)
        )
        if end is None:
            raise SchemaError("no window_end available and repository has no events")
        log = ProjectEventLog(
            repo_id=str(meta.get("repo_id", repo_id)),
            window_start=start,
            window_end=end,
            commits=tuple(commits),
            pull_requests=tuple(prs),
            issues=tuple(issues),
            releases=tuple(releases),
            stars_count=int(meta.get("stars_count", 0)),
            fork_count=int(meta.get("fork_count", 0)),
            watchers_count=int(meta.get("watchers_count", 0)),
            dependencies=tuple(deps),
        )
        write_archive(log, out)
        return load_archive(out)
    except (AuthError, RateLimited):
        raise
    except (requests.RequestException, SchemaError, InvariantViolation, PartialData, KeyError) as exc:
        if created and out.exists():
            shutil.rmtree(out)
        if isinstance(exc, PartialData):
            raise
        raise PartialData(f"fetch of {repo_id} aborted: {exc}") from exc

import json
import threading
from datetime import timedelta
from http.server import BaseHTTPRequestHandler, HTTPServer
from urllib.parse import parse_qs, urlparse

import pytest

from osshealth.errors import (
    AuthError,
    InvariantViolation,
    MissingFile,
    PartialData,
    SchemaError,
)
from osshealth.ingest import (
    CommitRecord,
    ProjectEventLog,
    clip_window,
    fetch_project,
    format_timestamp,
    load_archive,
    parse_timestamp,
    validate_log,
    write_archive,
)

from .conftest import ts


# --- timestamps ---------------------------------------------------------------

def test_parse_timestamp_variants():
    a = parse_timestamp("2023-06-01T12:00:00Z")
    b = parse_timestamp("2023-06-01T12:00:00+00:00")
    c = parse_timestamp("2023-06-01T14:00:00+02:00")
    assert a == b == c


def test_parse_timestamp_rejects_naive():
    with pytest.raises(ValueError):
        parse_timestamp("2023-06-01T12:00:00")
    with pytest.raises(ValueError):
        parse_timestamp(12345)


def test_format_round_trip():
    for text in ("2023-06-01T12:00:00Z", "2023-06-01T12:00:00.250000Z"):
        assert format_timestamp(parse_timestamp(text)) == text


# --- archive round-trip ---------------------------------------------------------

def test_archive_round_trip(make_log, tmp_path):
    for seed in range(10):
        log = make_log(seed=seed)
        out = tmp_path / f"arch{seed}"
        write_archive(log, out)
        assert load_archive(out) == log


def test_load_minirepo(minirepo):
    assert minirepo.repo_id == "acme/minirepo"
    assert len(minirepo.commits) == 3
    assert len(minirepo.pull_requests) == 2
    assert len(minirepo.issues) == 2
    assert validate_log(minirepo) == []


def test_missing_file(tmp_path):
    with pytest.raises(MissingFile):
        load_archive(tmp_path / "nope")


def test_bad_json_line(minirepo_path, tmp_path, minirepo):
    out = tmp_path / "broken"
    write_archive(minirepo, out)
    with (out / "commits.jsonl").open("a", encoding="utf-8") as fh:
        fh.write("{not json\n")
    with pytest.raises(SchemaError):
        load_archive(out)


def test_window_violation_detected(minirepo, tmp_path):
    stray = CommitRecord("zzz", "alice", minirepo.window_end + timedelta(days=9), 1)
    bad = ProjectEventLog(
        repo_id=minirepo.repo_id,
        window_start=minirepo.window_start,
        window_end=minirepo.window_end,
        commits=minirepo.commits + (stray,),
    )
    violations = validate_log(bad)
    assert any("outside window" in v for v in violations)
    out = tmp_path / "bad"
    write_archive(bad, out)
    # meta.json keeps the original window, so loading re-runs validation
    with pytest.raises(InvariantViolation):
        load_archive(out)


def test_validate_log_cases(minirepo):
    dup_sha = ProjectEventLog(
        repo_id="x", window_start=minirepo.window_start, window_end=minirepo.window_end,
        commits=(minirepo.commits[0], minirepo.commits[0]),
    )
    assert any("duplicated" in v for v in validate_log(dup_sha))

    inverted = ProjectEventLog(
        repo_id="x", window_start=minirepo.window_end, window_end=minirepo.window_start,
    )
    assert any("window_start after window_end" in v for v in validate_log(inverted))

    negative = ProjectEventLog(
        repo_id="x", window_start=minirepo.window_start,
        window_end=minirepo.window_end, stars_count=-1,
    )
    assert any("stars_count negative" in v for v in validate_log(negative))

    dup_deps = ProjectEventLog(
        repo_id="x", window_start=minirepo.window_start,
        window_end=minirepo.window_end, dependencies=("Foo", "foo"),
    )
    assert any("dependency" in v for v in validate_log(dup_deps))


def test_clip_window(minirepo):
    cutoff = ts("2023-04-01T00:00:00Z")
    clipped = clip_window(minirepo, cutoff)
    assert clipped.window_end == cutoff
    assert validate_log(clipped) == []
    assert all(c.authored_at <= cutoff for c in clipped.commits)
    for pr in clipped.pull_requests:
        assert pr.created_at <= cutoff
        assert pr.closed_at is None or pr.closed_at <= cutoff


# --- fetcher against a local mock API -------------------------------------------

class _MockApi(BaseHTTPRequestHandler):
    """Serves one repository; behavior knobs live on the server object."""

    def log_message(self, *args):
        pass

    def do_GET(self):
        server = self.server
        parsed = urlparse(self.path)
        page = int(parse_qs(parsed.query).get("page", ["1"])[0])
        auth = self.headers.get("Authorization", "")
        server.seen_auth.append(auth)

        if server.require_token and auth != f"Bearer {server.token}":
            self.send_response(401)
            self.end_headers()
            return
        if server.fail_on and parsed.path.endswith(server.fail_on[0]) and page == server.fail_on[1]:
            self.send_response(500)
            self.end_headers()
            return
        if server.flaky_remaining > 0:
            server.flaky_remaining -= 1
            self.send_response(503)
            self.end_headers()
            return

        body = server.routes.get(parsed.path)
        if body is None:
            self.send_response(404)
            self.end_headers()
            return
        payload = body(page) if callable(body) else body
        data = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(data)


def _paged(rows, per_page=2):
    def handler(page):
        lo = (page - 1) * per_page
        return rows[lo:lo + per_page]
    return handler


@pytest.fixture
def mock_server(minirepo):
    def pairs(group):
        return [{"author_id": a, "timestamp": format_timestamp(t)} for a, t in group]

    routes = {
        "/repos/acme/minirepo/meta": {
            "repo_id": minirepo.repo_id,
            "window_start": format_timestamp(minirepo.window_start),
            "window_end": format_timestamp(minirepo.window_end),
            "stars_count": minirepo.stars_count,
            "fork_count": minirepo.fork_count,
            "watchers_count": minirepo.watchers_count,
        },
        "/repos/acme/minirepo/commits": _paged([
            {"sha": c.sha, "author_id": c.author_id,
             "authored_at": format_timestamp(c.authored_at),
             "files_changed": c.files_changed}
            for c in minirepo.commits
        ]),
        "/repos/acme/minirepo/pull_requests": _paged([
            {"number": pr.number, "author_id": pr.author_id,
             "created_at": format_timestamp(pr.created_at),
             "closed_at": format_timestamp(pr.closed_at) if pr.closed_at else None,
             "merged": pr.merged, "files": list(pr.files),
             "commit_shas": list(pr.commit_shas),
             "comments": pairs(pr.comments), "reviews": pairs(pr.reviews),
             "review_comments": pairs(pr.review_comments)}
            for pr in minirepo.pull_requests
        ]),
        "/repos/acme/minirepo/issues": _paged([
            {"number": i.number, "author_id": i.author_id,
             "created_at": format_timestamp(i.created_at),
             "closed_at": format_timestamp(i.closed_at) if i.closed_at else None,
             "comments": pairs(i.comments)}
            for i in minirepo.issues
        ]),
        "/repos/acme/minirepo/releases": _paged(
            [format_timestamp(t) for t in minirepo.releases]),
        "/repos/acme/minirepo/dependencies": list(minirepo.dependencies),
    }
    server = HTTPServer(("127.0.0.1", 0), _MockApi)
    server.routes = routes
    server.require_token = False
    server.token = "s3cret"
    server.fail_on = None
    server.flaky_remaining = 0
    server.seen_auth = []
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()
    thread.join()


def _base_url(server):
    return f"http://127.0.0.1:{server.server_address[1]}"


def test_fetch_round_trips_minirepo(mock_server, minirepo, tmp_path):
    out = tmp_path / "fetched"
    log = fetch_project(_base_url(mock_server), "acme/minirepo", "", out_dir=out,
                        backoff_base=0.001)
    assert log == minirepo
    assert load_archive(out) == minirepo


def test_fetch_sends_bearer_token(mock_server, tmp_path):
    mock_server.require_token = True
    out = tmp_path / "fetched"
    fetch_project(_base_url(mock_server), "acme/minirepo", "s3cret", out_dir=out,
                  backoff_base=0.001)
    assert all(a == "Bearer s3cret" for a in mock_server.seen_auth)


def test_fetch_auth_error(mock_server, tmp_path):
    mock_server.require_token = True
    out = tmp_path / "fetched"
    with pytest.raises(AuthError):
        fetch_project(_base_url(mock_server), "acme/minirepo", "wrong", out_dir=out,
                      backoff_base=0.001)
    assert not out.exists()


def test_fetch_retries_transient_errors(mock_server, minirepo, tmp_path):
    mock_server.flaky_remaining = 3  # first three responses are 503
    out = tmp_path / "fetched"
    log = fetch_project(_base_url(mock_server), "acme/minirepo", "", out_dir=out,
                        backoff_base=0.001)
    assert log == minirepo


def test_fetch_partial_failure_leaves_no_archive(mock_server, tmp_path):
    mock_server.fail_on = ("/issues", 2)  # page 2 of issues always 500s
    out = tmp_path / "fetched"
    with pytest.raises(PartialData):
        fetch_project(_base_url(mock_server), "acme/minirepo", "", out_dir=out,
                      backoff_base=0.001)
    assert not out.exists()

"""GitHub REST client that mines a repository into the commit-log format.

Commits are listed 100 per page; file-level churn needs one detail request
per commit, so every fetched commit is cached on disk under
``<cache_dir>/<owner>/<repo>/<sha>.json`` and never requested again.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
import threading
import time
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import httpx

from .errors import AuthFailed, NotFound, RateLimited, TransientHttp
from .history import (
    CommitRecord,
    FileChange,
    commit_from_dict,
    dumps_commit,
    format_timestamp,
    parse_timestamp,
)

logger = logging.getLogger(__name__)

API_URL = "https://api.github.com"
PER_PAGE = 100
TOKEN_ENV = "GITHUB_TOKEN"


@dataclass(frozen=True)
class FetchJob:
    owner: str
    repo: str
    since: datetime | None = None
    until: datetime | None = None
    token: str | None = None
    cache_dir: Path = Path(".orgcoupling-cache")
    base_url: str = API_URL
    parallelism: int = 4
    rate_policy: str = "wait"
    include_merges: bool = False
    max_retries: int = 5
    backoff: float = 1.0
    # repository slug written into commit records; defaults to the repo name
    slug: str | None = None

    def __post_init__(self) -> None:
        if self.since and self.until and not self.since < self.until:
            raise ValueError("since must precede until")
        if self.rate_policy not in ("wait", "fail"):
            raise ValueError(f"unknown rate policy {self.rate_policy!r}")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")


@dataclass
class FetchReport:
    commits_fetched: int = 0
    commits_from_cache: int = 0
    requests_made: int = 0
    rate_limit_waits: int = 0
    list_requests: int = 0
    detail_requests: int = 0
    merges_skipped: int = 0
    include_merges: bool = False


def rate_limit_gate(
    remaining: int,
    reset_at: datetime,
    policy: str = "wait",
    now: datetime | None = None,
    threshold: int = 0,
) -> float:
    """Seconds to wait before the next request (0 when budget remains)."""
    if remaining > threshold:
        return 0.0
    if policy == "fail":
        raise RateLimited(f"rate limit exhausted until {format_timestamp(reset_at)}")
    now = now or datetime.now(timezone.utc)
    return max((reset_at - now).total_seconds(), 0.0)


class RateLimiter:
    """Shared budget tracker fed from ``x-ratelimit-*`` response headers."""

    def __init__(self, policy: str = "wait", threshold: int = 0,
                 sleep: Callable[[float], None] = time.sleep,
                 clock: Callable[[], datetime] = lambda: datetime.now(timezone.utc)):
        self.policy = policy
        self.threshold = threshold
        self._sleep = sleep
        self._clock = clock
        self._lock = threading.Lock()
        self.remaining: int | None = None
        self.reset_at: datetime | None = None
        self.waits = 0

    def acquire(self) -> None:
        with self._lock:
            if self.remaining is not None and self.reset_at is not None:
                delay = rate_limit_gate(
                    self.remaining, self.reset_at, self.policy, self._clock(), self.threshold
                )
                if self.remaining <= self.threshold:
                    logger.warning("rate limit reached, waiting %.0f s", delay)
                    self.waits += 1
                    self._sleep(delay)
                    self.remaining = None
                    self.reset_at = None
            if self.remaining is not None:
                self.remaining -= 1

    def update(self, headers: httpx.Headers) -> None:
        remaining = headers.get("x-ratelimit-remaining")
        reset = headers.get("x-ratelimit-reset")
        if remaining is None or reset is None:
            return
        with self._lock:
            self.remaining = int(remaining)
            self.reset_at = datetime.fromtimestamp(int(reset), tz=timezone.utc)


class CommitCache:
    def __init__(self, root: str | os.PathLike, owner: str, repo: str):
        self.dir = Path(root) / owner / repo

    def path(self, sha: str) -> Path:
        return self.dir / f"{sha}.json"

    def get(self, sha: str) -> str | None:
        try:
            return self.path(sha).read_text(encoding="utf-8")
        except FileNotFoundError:
            return None

    def put(self, sha: str, line: str) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.dir, prefix=f".{sha}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(line)
            os.replace(tmp, self.path(sha))
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise


def commit_from_api(data: dict, slug: str) -> CommitRecord:
    """Convert a ``GET /repos/{owner}/{repo}/commits/{sha}`` payload."""
    author = data["commit"]["author"] or {}
    changes = []
    for f in data.get("files") or ():
        additions, deletions = int(f.get("additions", 0)), int(f.get("deletions", 0))
        binary = (
            additions == deletions == 0
            and "patch" not in f
            and f.get("status") in ("added", "modified", "removed")
        )
        changes.append(FileChange(f["filename"], additions, deletions, binary=binary))
    return CommitRecord(
        sha=data["sha"],
        repo=slug,
        author_name=author.get("name") or "",
        author_email=author.get("email") or "",
        timestamp=parse_timestamp(author["date"]),
        changes=tuple(changes),
    )


class _Session:
    def __init__(self, job: FetchJob, client: httpx.Client, limiter: RateLimiter,
                 sleep: Callable[[float], None]):
        self.job = job
        self.client = client
        self.limiter = limiter
        self.sleep = sleep
        self.lock = threading.Lock()
        self.report = FetchReport(include_merges=job.include_merges)

    def get(self, url: str, params: dict | None = None, kind: str = "list"):
        attempt = 0
        while True:
            self.limiter.acquire()
            with self.lock:
                self.report.requests_made += 1
                if kind == "list":
                    self.report.list_requests += 1
                else:
                    self.report.detail_requests += 1
            try:
                resp = self.client.get(url, params=params)
            except httpx.TransportError as exc:
                problem = f"{type(exc).__name__}: {exc}"
            else:
                self.limiter.update(resp.headers)
                status = resp.status_code
                if status == 200:
                    return resp.json()
                if status in (403, 429) and resp.headers.get("x-ratelimit-remaining") == "0":
                    if self.job.rate_policy == "fail":
                        raise RateLimited(f"GitHub rate limit exhausted for {url}")
                    if self.limiter.reset_at is not None:
                        continue
                elif status in (401, 403):
                    raise AuthFailed(f"GitHub refused {url} ({status}): check the token")
                elif status == 404:
                    raise NotFound(f"{url} not found")
                elif status < 500 and status != 429:
                    raise TransientHttp(f"unexpected status {status} for {url}")
                problem = f"HTTP {status}"
            if attempt >= self.job.max_retries:
                raise TransientHttp(f"{url} failed after {attempt + 1} attempts: {problem}")
            delay = self.job.backoff * 2**attempt
            logger.info("retrying %s in %.1f s (%s)", url, delay, problem)
            self.sleep(delay)
            attempt += 1


def fetch_repo_commits(
    job: FetchJob,
    client: httpx.Client | None = None,
    sleep: Callable[[float], None] = time.sleep,
    limiter: RateLimiter | None = None,
) -> tuple[list[CommitRecord], FetchReport]:
    """List a repository's commits in the job window and fetch their file stats.

    Returns commits in ascending (timestamp, repo, sha) order.  Merge commits
    are skipped unless ``job.include_merges``.
    """
    slug = job.slug or job.repo
    own_client = client is None
    if own_client:
        headers = {"Accept": "application/vnd.github+json", "X-GitHub-Api-Version": "2022-11-28"}
        if job.token:
            headers["Authorization"] = f"Bearer {job.token}"
        client = httpx.Client(base_url=job.base_url, headers=headers, timeout=30.0)
    limiter = limiter or RateLimiter(job.rate_policy, sleep=sleep)
    session = _Session(job, client, limiter, sleep)
    cache = CommitCache(job.cache_dir, job.owner, job.repo)
    base = f"/repos/{job.owner}/{job.repo}/commits"
    try:
        shas: list[str] = []
        page = 1
        while True:
            params = {"per_page": PER_PAGE, "page": page}
            if job.since:
                params["since"] = format_timestamp(job.since)
            if job.until:
                params["until"] = format_timestamp(job.until)
            items = session.get(base, params, kind="list")
            for item in items:
                if len(item.get("parents") or ()) > 1 and not job.include_merges:
                    session.report.merges_skipped += 1
                    continue
                shas.append(item["sha"])
            if len(items) < PER_PAGE:
                break
            page += 1

        def one(sha: str) -> tuple[str, bool]:
            cached = cache.get(sha)
            if cached is not None:
                return cached, True
            line = dumps_commit(commit_from_api(session.get(f"{base}/{sha}", kind="detail"), slug))
            cache.put(sha, line)
            return line, False

        with ThreadPoolExecutor(max_workers=job.parallelism) as pool:
            results = list(pool.map(one, dict.fromkeys(shas)))
    finally:
        if own_client:
            client.close()

    commits = []
    for line, hit in results:
        commits.append(commit_from_dict(json.loads(line)))
        if hit:
            session.report.commits_from_cache += 1
    session.report.commits_fetched = len(commits)
    session.report.rate_limit_waits = limiter.waits
    commits.sort(key=lambda c: c.sort_key)
    return commits, session.report

"""Commit-history ingest.

Loads commits from local git clones (via ``git log --numstat``) or from the
portable JSON Lines commit log, canonicalizes author identities and tags every
file change with the microservice that owns it.

Commit-log line format::

    {"sha": "...", "repo": "orca", "author_name": "...", "author_email": "...",
     "timestamp": "2017-06-05T00:00:00Z",
     "files": [{"path": "src/a.kt", "additions": 3, "deletions": 1}]}

A file with unknown churn (binary) is written with zero additions/deletions and
``"binary": true``.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import logging
import os
import re
import subprocess
from collections.abc import Iterable, Iterator, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Union

import yaml

from .errors import (
    DuplicateShaConflict,
    EmptyIdentity,
    GitInvocationFailed,
    InvalidServiceMap,
    MalformedCommitLog,
    MalformedNumstat,
    RepoNotFound,
    UnmappedFile,
)

logger = logging.getLogger(__name__)

UNMAPPED = "unmapped"

_SHA_RE = re.compile(r"^[0-9a-f]{40}$")


@dataclass(frozen=True)
class FileChange:
    path: str
    additions: int
    deletions: int
    binary: bool = False
    service: str | None = None

    def __post_init__(self) -> None:
        if not self.path or "\\" in self.path:
            raise ValueError(f"invalid file path: {self.path!r}")
        if self.additions < 0 or self.deletions < 0:
            raise ValueError(f"negative churn for {self.path!r}")

    @property
    def churn(self) -> int:
        return self.additions + self.deletions


@dataclass(frozen=True)
class CommitRecord:
    sha: str
    repo: str
    author_name: str
    author_email: str
    timestamp: datetime
    changes: tuple[FileChange, ...] = ()
    author_canonical: str = ""

    @property
    def sort_key(self) -> tuple[datetime, str, str]:
        return (self.timestamp, self.repo, self.sha)

    def services(self) -> frozenset[str]:
        """Services touched by this commit (unmapped files excluded)."""
        return frozenset(
            c.service for c in self.changes if c.service is not None and c.service != UNMAPPED
        )

    def churn_by_service(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for c in self.changes:
            if c.service is not None and c.service != UNMAPPED:
                out[c.service] = out.get(c.service, 0) + c.churn
        return out

    def raw(self) -> CommitRecord:
        """The record as read from its source, before canonicalization and tagging."""
        return dataclasses.replace(
            self,
            author_canonical="",
            changes=tuple(dataclasses.replace(c, service=None) for c in self.changes),
        )


# --------------------------------------------------------------------------
# service map


def _glob_to_regex(pattern: str) -> re.Pattern[str]:
    # `*` and `?` stay within one path segment, `**` crosses segments
    out = []
    i = 0
    while i < len(pattern):
        ch = pattern[i]
        if pattern.startswith("**/", i):
            out.append("(?:.*/)?")
            i += 3
        elif pattern.startswith("**", i):
            out.append(".*")
            i += 2
        elif ch == "*":
            out.append("[^/]*")
            i += 1
        elif ch == "?":
            out.append("[^/]")
            i += 1
        else:
            out.append(re.escape(ch))
            i += 1
    return re.compile("".join(out) + r"\Z", re.DOTALL)


@functools.lru_cache(maxsize=1024)
def glob_match(pattern: str, text: str) -> bool:
    return _glob_to_regex(pattern).match(text) is not None


@dataclass(frozen=True)
class ServiceRule:
    service: str
    repo_pattern: str
    path_pattern: str = "**"


@dataclass(frozen=True)
class ServiceMap:
    """Ordered rules mapping (repo, path) to a service; first match wins."""

    rules: tuple[ServiceRule, ...]
    unmapped_policy: str = "ignore"

    def __post_init__(self) -> None:
        if not self.rules:
            raise InvalidServiceMap("service map needs at least one rule")
        if self.unmapped_policy not in ("ignore", "error"):
            raise InvalidServiceMap(f"unknown unmapped_policy {self.unmapped_policy!r}")
        for rule in self.rules:
            if not rule.service or rule.service == UNMAPPED:
                raise InvalidServiceMap(f"invalid service name {rule.service!r}")

    @classmethod
    def from_dict(cls, data: Mapping) -> ServiceMap:
        try:
            rules = tuple(
                ServiceRule(
                    service=str(r["service"]),
                    repo_pattern=str(r.get("repo_pattern", "*")),
                    path_pattern=str(r.get("path_pattern", "**")),
                )
                for r in data["rules"]
            )
        except (KeyError, TypeError) as exc:
            raise InvalidServiceMap(f"malformed service map: {exc}") from exc
        return cls(rules, str(data.get("unmapped_policy", "ignore")))

    @classmethod
    def polyrepo(cls, repos: Iterable[str]) -> ServiceMap:
        """One service per repository, named after the repository."""
        return cls(tuple(ServiceRule(r, r, "**") for r in repos))

    def to_dict(self) -> dict:
        return {
            "unmapped_policy": self.unmapped_policy,
            "rules": [dataclasses.asdict(r) for r in self.rules],
        }


def load_service_map(path: str | os.PathLike) -> ServiceMap:
    """Read a service map from YAML (or JSON, which is valid YAML).

    ::

        unmapped_policy: ignore      # or: error
        rules:
          - {service: orca, repo_pattern: orca, path_pattern: "**"}
          - {service: gate, repo_pattern: mono, path_pattern: "services/gate/**"}
    """
    with open(path, encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise InvalidServiceMap(f"{path}: {exc}") from exc
    if not isinstance(data, Mapping):
        raise InvalidServiceMap(f"{path}: expected a mapping at top level")
    return ServiceMap.from_dict(data)


def resolve_service(repo: str, path: str, service_map: ServiceMap) -> str:
    for rule in service_map.rules:
        if glob_match(rule.repo_pattern, repo) and glob_match(rule.path_pattern, path):
            return rule.service
    if service_map.unmapped_policy == "error":
        raise UnmappedFile(f"no service rule matches {repo}:{path}")
    return UNMAPPED


# --------------------------------------------------------------------------
# identities


def load_aliases(path: str | os.PathLike) -> dict[str, str]:
    """Parse ``raw-email = canonical-id`` lines; ``#`` starts a comment."""
    aliases: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            email, sep, target = line.partition("=")
            if not sep or not email.strip() or not target.strip():
                raise MalformedCommitLog(f"{path}:{lineno}: expected 'email = id'")
            aliases[email.strip().lower()] = target.strip()
    return aliases


def canonicalize_identity(
    author_email: str, author_name: str, aliases: Mapping[str, str] | None = None
) -> str:
    email = (author_email or "").strip().lower()
    if aliases and email in aliases:
        return aliases[email]
    if email:
        return email.split("@", 1)[0]
    name = (author_name or "").strip().lower()
    if not name:
        raise EmptyIdentity("commit has neither author email nor author name")
    return name


# --------------------------------------------------------------------------
# commit-log serialization


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 instant (or bare date) into an aware UTC datetime."""
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def commit_to_dict(commit: CommitRecord) -> dict:
    files = []
    for c in commit.changes:
        entry: dict = {"path": c.path, "additions": c.additions, "deletions": c.deletions}
        if c.binary:
            entry["binary"] = True
        files.append(entry)
    return {
        "sha": commit.sha,
        "repo": commit.repo,
        "author_name": commit.author_name,
        "author_email": commit.author_email,
        "timestamp": format_timestamp(commit.timestamp),
        "files": files,
    }


def commit_from_dict(data: Mapping) -> CommitRecord:
    try:
        sha = str(data["sha"]).lower()
        if not _SHA_RE.match(sha):
            raise ValueError(f"bad sha {sha!r}")
        changes = tuple(
            FileChange(
                path=str(f["path"]),
                additions=int(f.get("additions", 0)),
                deletions=int(f.get("deletions", 0)),
                binary=bool(f.get("binary", False)),
            )
            for f in data.get("files", ())
        )
        return CommitRecord(
            sha=sha,
            repo=str(data["repo"]),
            author_name=str(data.get("author_name") or ""),
            author_email=str(data.get("author_email") or ""),
            timestamp=parse_timestamp(str(data["timestamp"])),
            changes=changes,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedCommitLog(f"invalid commit record: {exc}") from exc


def dumps_commit(commit: CommitRecord) -> str:
    return json.dumps(commit_to_dict(commit), ensure_ascii=False)


def write_commit_log(commits: Iterable[CommitRecord], dest: str | os.PathLike | IO[str]) -> int:
    """Write commits as JSON Lines; returns the number written."""
    if hasattr(dest, "write"):
        n = 0
        for commit in commits:
            dest.write(dumps_commit(commit) + "\n")
            n += 1
        return n
    with open(dest, "w", encoding="utf-8", newline="\n") as fh:
        return write_commit_log(commits, fh)


def iter_commit_log(path: str | os.PathLike) -> Iterator[CommitRecord]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedCommitLog(f"{path}:{lineno}: {exc}") from exc
            try:
                yield commit_from_dict(data)
            except MalformedCommitLog as exc:
                raise MalformedCommitLog(f"{path}:{lineno}: {exc}") from exc


def read_commit_log(path: str | os.PathLike) -> list[CommitRecord]:
    return list(iter_commit_log(path))


# --------------------------------------------------------------------------
# local git extraction

_LOG_FORMAT = "%x1e%H%x1f%P%x1f%an%x1f%ae%x1f%at"


def _git(repo_path: str | os.PathLike, *args: str) -> subprocess.CompletedProcess[str]:
    try:
        return subprocess.run(
            ["git", "-C", os.fspath(repo_path), *args],
            capture_output=True,
            text=True,
            encoding="utf-8",
            errors="surrogateescape",
        )
    except FileNotFoundError as exc:
        raise GitInvocationFailed("git executable not found") from exc


def _parse_numstat(entry: str) -> FileChange:
    parts = entry.split("\t", 2)
    if len(parts) != 3 or not parts[2]:
        raise MalformedNumstat(f"unparseable numstat line: {entry!r}")
    added, deleted, path = parts
    if added == "-" and deleted == "-":
        return FileChange(path, 0, 0, binary=True)
    try:
        return FileChange(path, int(added), int(deleted))
    except ValueError as exc:
        raise MalformedNumstat(f"unparseable numstat line: {entry!r}") from exc


def parse_git_log(output: str, repo_slug: str) -> list[CommitRecord]:
    """Parse ``git log -z --numstat --format=<_LOG_FORMAT>`` output."""
    commits = []
    for chunk in output.split("\x1e"):
        if not chunk.strip("\n\0"):
            continue
        header, _, body = chunk.partition("\0")
        fields = header.split("\x1f")
        if len(fields) != 5:
            raise MalformedNumstat(f"unparseable commit header: {header!r}")
        sha, _parents, name, email, epoch = fields
        changes = tuple(
            _parse_numstat(entry) for entry in body.lstrip("\n").split("\0") if entry.strip("\n")
        )
        commits.append(
            CommitRecord(
                sha=sha,
                repo=repo_slug,
                author_name=name,
                author_email=email,
                timestamp=datetime.fromtimestamp(int(epoch), tz=timezone.utc),
                changes=changes,
            )
        )
    return commits


def extract_from_git(
    repo_path: str | os.PathLike, repo_slug: str | None = None, include_merges: bool = False
) -> list[CommitRecord]:
    """Read every first-parent commit of HEAD with per-file numstat churn.

    Merge commits are dropped unless *include_merges*, in which case their
    churn is the diff against the first parent.  Renames are reported as a
    deletion plus an addition so both paths carry churn.
    """
    repo_path = Path(repo_path)
    slug = repo_slug or repo_path.resolve().name.removesuffix(".git")
    if not repo_path.is_dir() or _git(repo_path, "rev-parse", "--git-dir").returncode != 0:
        raise RepoNotFound(f"not a git repository: {repo_path}")
    if _git(repo_path, "rev-parse", "--verify", "--quiet", "HEAD").returncode != 0:
        return []
    merge_args = ["--diff-merges=first-parent"] if include_merges else ["--no-merges"]
    proc = _git(
        repo_path,
        "log",
        "--first-parent",
        *merge_args,
        "-z",
        "--no-renames",
        "--numstat",
        f"--format={_LOG_FORMAT}",
        "HEAD",
    )
    if proc.returncode != 0:
        raise GitInvocationFailed(f"git log failed in {repo_path}: {proc.stderr.strip()}")
    return parse_git_log(proc.stdout, slug)


# --------------------------------------------------------------------------
# history

Source = Union[str, os.PathLike, tuple[str, Union[str, os.PathLike]]]


@dataclass(frozen=True)
class History:
    """Service-tagged commits in global (timestamp, repo, sha) order."""

    commits: tuple[CommitRecord, ...]
    services: tuple[str, ...] = ()
    identity_aliases: Mapping[str, str] = field(default_factory=dict)

    @classmethod
    def from_commits(
        cls, commits: Iterable[CommitRecord], identity_aliases: Mapping[str, str] | None = None
    ) -> History:
        """Build a history from already canonicalized and tagged commits."""
        ordered = tuple(sorted(commits, key=lambda c: c.sort_key))
        services: set[str] = set()
        for c in ordered:
            services |= c.services()
        return cls(ordered, tuple(sorted(services)), dict(identity_aliases or {}))

    def __len__(self) -> int:
        return len(self.commits)

    @property
    def developers(self) -> tuple[str, ...]:
        return tuple(sorted({c.author_canonical for c in self.commits}))

    def between(self, start: datetime | None = None, end: datetime | None = None) -> History:
        """Commits with ``start <= timestamp < end``."""
        kept = [
            c
            for c in self.commits
            if (start is None or c.timestamp >= start) and (end is None or c.timestamp < end)
        ]
        return History.from_commits(kept, self.identity_aliases)

    def until(self, cutoff: datetime | None) -> History:
        """Commits with ``timestamp <= cutoff`` (inclusive)."""
        if cutoff is None:
            return self
        return History.from_commits(
            (c for c in self.commits if c.timestamp <= cutoff), self.identity_aliases
        )

    def summary(self) -> dict:
        changes = [ch for c in self.commits for ch in c.changes]
        mapped = [ch for ch in changes if ch.service not in (None, UNMAPPED)]
        per_service: dict[str, dict[str, int]] = {}
        for c in self.commits:
            for svc, churn in c.churn_by_service().items():
                s = per_service.setdefault(svc, {"commits": 0, "churn": 0, "developers": set()})
                s["commits"] += 1
                s["churn"] += churn
                s["developers"].add(c.author_canonical)
        return {
            "commits": len(self.commits),
            "developers": len(self.developers),
            "file_changes": len(changes),
            "churn": sum(ch.churn for ch in changes),
            "unmapped_churn": sum(ch.churn for ch in changes) - sum(ch.churn for ch in mapped),
            "services": {
                svc: {
                    "commits": s["commits"],
                    "churn": s["churn"],
                    "developers": len(s["developers"]),
                }
                for svc, s in sorted(per_service.items())
            },
        }


def _read_source(source: Source, include_merges: bool) -> list[CommitRecord]:
    if isinstance(source, tuple):
        slug, path = source
        return extract_from_git(path, slug, include_merges)
    path = Path(source)
    if path.is_dir():
        return extract_from_git(path, None, include_merges)
    if not path.exists():
        raise RepoNotFound(f"no such commit log or repository: {path}")
    return read_commit_log(path)


def tag_commit(
    commit: CommitRecord, service_map: ServiceMap, aliases: Mapping[str, str] | None = None
) -> CommitRecord:
    """Canonicalize the author and resolve every file change to a service."""
    return dataclasses.replace(
        commit,
        author_canonical=canonicalize_identity(commit.author_email, commit.author_name, aliases),
        changes=tuple(
            dataclasses.replace(c, service=resolve_service(commit.repo, c.path, service_map))
            for c in commit.changes
        ),
    )


def load_history(
    sources: Sequence[Source] | Iterable[CommitRecord],
    service_map: ServiceMap,
    aliases: Mapping[str, str] | None = None,
    include_merges: bool = False,
    jobs: int = 4,
) -> History:
    """Merge commit sources into one deterministic, service-tagged history.

    *sources* holds commit-log files, git repository paths (slug = directory
    name) or ``(slug, path)`` pairs; an iterable of :class:`CommitRecord` is
    also accepted.  Commits lacking any author identity are dropped.
    """
    sources = list(sources)
    if sources and all(isinstance(s, CommitRecord) for s in sources):
        batches = [sources]
    else:
        with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
            batches = list(pool.map(lambda s: _read_source(s, include_merges), sources))

    seen: dict[tuple[str, str], CommitRecord] = {}
    for batch in batches:
        for commit in batch:
            raw = commit.raw()
            key = (raw.repo, raw.sha)
            prior = seen.get(key)
            if prior is None:
                seen[key] = raw
            elif prior != raw:
                raise DuplicateShaConflict(f"commit {raw.sha} in {raw.repo} differs between sources")

    aliases = {k.lower(): v for k, v in (aliases or {}).items()}
    identity_map: dict[str, str] = {}
    tagged = []
    dropped = 0
    for raw in seen.values():
        try:
            commit = tag_commit(raw, service_map, aliases)
        except EmptyIdentity:
            dropped += 1
            continue
        if raw.author_email:
            identity_map[raw.author_email.strip().lower()] = commit.author_canonical
        tagged.append(commit)
    if dropped:
        logger.warning("dropped %d commits without author identity", dropped)
    history = History.from_commits(tagged, dict(sorted(identity_map.items())))
    s = history.summary()
    logger.info(
        "loaded %d commits by %d developers with %d file changes",
        s["commits"],
        s["developers"],
        s["file_changes"],
    )
    return history

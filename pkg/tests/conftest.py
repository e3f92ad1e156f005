import hashlib
import os
import shutil
import subprocess
from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

from orgcoupling.history import CommitRecord, FileChange, History, ServiceMap, load_history

T0 = datetime(2020, 1, 1, tzinfo=timezone.utc)

requires_git = pytest.mark.skipif(shutil.which("git") is None, reason="git not installed")

_ACCEPTANCE: dict[int, list] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    number, title = mark.args
    entry = _ACCEPTANCE.setdefault(number, [title, "PASS", 0.0])
    entry[2] += rep.duration
    if rep.failed:
        entry[1] = "FAIL"
    elif rep.skipped and entry[1] == "PASS":
        entry[1] = "SKIP"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, status, seconds = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {title} ({seconds:.2f} s)")


def sha(label: str) -> str:
    return hashlib.sha1(label.encode()).hexdigest()


def make_commit(label, author, hours, files, repo="mono", name=None):
    """files: iterable of (path, additions, deletions)."""
    return CommitRecord(
        sha=sha(label),
        repo=repo,
        author_name=name or author.upper(),
        author_email=f"{author}@example.org",
        timestamp=T0 + timedelta(hours=hours),
        changes=tuple(FileChange(p, a, d, binary=(a == d == 0 and p.endswith(".bin")))
                      for p, a, d in files),
    )


# services are the first path segment of the "mono" repo
MONO_MAP = ServiceMap.from_dict({
    "rules": [
        {"service": "a", "repo_pattern": "mono", "path_pattern": "a/**"},
        {"service": "b", "repo_pattern": "mono", "path_pattern": "b/**"},
        {"service": "c", "repo_pattern": "mono", "path_pattern": "c/**"},
        {"service": "d", "repo_pattern": "mono", "path_pattern": "d/**"},
    ],
})


def history_of(commits, service_map=MONO_MAP) -> History:
    return load_history(list(commits), service_map)


def touch_sequence(author, pattern, churn=None, start=0):
    """Commits following a pattern like ["a", "b", "ab"]; churn per touched service."""
    out = []
    for i, p in enumerate(pattern):
        files = []
        for svc in p:
            add, dele = (churn or {}).get(svc, (1, 0))
            files.append((f"{svc}/f{i}.txt", add, dele))
        out.append(make_commit(f"{author}-{start + i}", author, start + i, files))
    return out


class GitRepo:
    def __init__(self, path: Path):
        self.path = path
        path.mkdir(parents=True, exist_ok=True)
        self.git("init", "-q", "-b", "main")

    def git(self, *args, env=None):
        full_env = {**os.environ, "GIT_CONFIG_NOSYSTEM": "1", "HOME": str(self.path),
                    **(env or {})}
        return subprocess.run(["git", "-C", str(self.path), *args], check=True,
                              capture_output=True, text=True, env=full_env).stdout

    def commit(self, files: dict, author="Jane Doe", email="jane@example.org",
               when="2020-01-01T00:00:00Z", message="change", remove=()):
        for rel, content in files.items():
            p = self.path / rel
            p.parent.mkdir(parents=True, exist_ok=True)
            if isinstance(content, bytes):
                p.write_bytes(content)
            else:
                p.write_text(content)
        for rel in remove:
            self.git("rm", "-q", rel)
        self.git("add", "-A")
        env = {
            "GIT_AUTHOR_NAME": author, "GIT_AUTHOR_EMAIL": email, "GIT_AUTHOR_DATE": when,
            "GIT_COMMITTER_NAME": author, "GIT_COMMITTER_EMAIL": email,
            "GIT_COMMITTER_DATE": when,
        }
        self.git("commit", "-q", "--allow-empty", "-m", message, env=env)
        return self.git("rev-parse", "HEAD").strip()


@pytest.fixture
def git_repo(tmp_path):
    def factory(name="repo"):
        return GitRepo(tmp_path / name)
    return factory


def build_polyrepo_fixture(root: Path):
    """Two service repositories with interleaved authors; returns {slug: GitRepo}."""
    orca = GitRepo(root / "orca")
    gate = GitRepo(root / "gate")
    orca.commit({"src/Main.kt": "a\nb\nc\n"}, "Lars W", "lwander@google.com", "2020-01-01T10:00:00Z")
    gate.commit({"src/Api.kt": "x\ny\n"}, "Lars W", "lwander@users.noreply.github.com",
                "2020-01-02T10:00:00Z")
    orca.commit({"src/Main.kt": "a\n", "README.md": "hi\n"}, "Lars W", "lwander@google.com",
                "2020-01-03T10:00:00Z")
    gate.commit({"src/Api.kt": "x\ny\nz\nw\n"}, "Dana", "dana@example.org", "2020-01-04T10:00:00Z")
    orca.commit({"src/Other.kt": "1\n2\n3\n4\n5\n"}, "Dana", "dana@example.org",
                "2020-01-05T10:00:00Z")
    gate.commit({"src/Api.kt": "q\n"}, "Lars W", "lwander@google.com", "2020-01-06T10:00:00Z")
    return {"orca": orca, "gate": gate}


@pytest.fixture
def polyrepo(tmp_path):
    return build_polyrepo_fixture(tmp_path)

import json
import subprocess
from datetime import datetime, timezone

import pytest
from hypothesis import given, strategies as st

from conftest import T0, make_commit, requires_git, sha
from orgcoupling.errors import (
    DuplicateShaConflict,
    EmptyIdentity,
    InvalidServiceMap,
    MalformedCommitLog,
    MalformedNumstat,
    RepoNotFound,
    UnmappedFile,
)
from orgcoupling.history import (
    UNMAPPED,
    FileChange,
    ServiceMap,
    ServiceRule,
    canonicalize_identity,
    extract_from_git,
    glob_match,
    load_aliases,
    load_history,
    load_service_map,
    parse_git_log,
    parse_timestamp,
    read_commit_log,
    resolve_service,
    write_commit_log,
)


# ---------------------------------------------------------------- identities

@pytest.mark.parametrize("email, name, expected", [
    ("lwander@users.noreply.github.com", "", "lwander"),
    ("lwander@google.com", "Lars", "lwander"),
    ("LWander@Google.com", "", "lwander"),
    ("", "Jane Doe", "jane doe"),
    ("no-at-sign", "", "no-at-sign"),
])
def test_canonicalize_identity(email, name, expected):
    assert canonicalize_identity(email, name, {}) == expected


def test_canonicalize_alias_wins():
    aliases = {"lars@old-company.com": "lwander"}
    assert canonicalize_identity("Lars@Old-Company.com", "", aliases) == "lwander"


def test_canonicalize_empty_identity():
    with pytest.raises(EmptyIdentity):
        canonicalize_identity("", "  ", {})


@given(st.text(alphabet=st.characters(blacklist_characters="@", blacklist_categories=("Cs",)),
               min_size=1).map(str.strip).filter(bool))
def test_canonicalize_is_fixed_point_without_at(text):
    once = canonicalize_identity(text, "", {})
    assert canonicalize_identity(once, "", {}) == once


def test_load_aliases(tmp_path):
    p = tmp_path / "aliases.txt"
    p.write_text("# comment\nLars@Old.com = lwander\n\nx@y.z=someone  # trailing\n")
    assert load_aliases(p) == {"lars@old.com": "lwander", "x@y.z": "someone"}
    p.write_text("garbage line\n")
    with pytest.raises(MalformedCommitLog):
        load_aliases(p)


# --------------------------------------------------------------- service map

def test_resolve_polyrepo_rule():
    smap = ServiceMap((ServiceRule("orca", "orca", "**"),))
    assert resolve_service("orca", "src/main.kt", smap) == "orca"


def test_resolve_first_match_wins():
    smap = ServiceMap((ServiceRule("a", "mono", "src/a/**"), ServiceRule("b", "mono", "**")))
    assert resolve_service("mono", "src/a/x", smap) == "a"
    assert resolve_service("mono", "src/b/x", smap) == "b"


def test_resolve_unmapped_policies():
    smap = ServiceMap((ServiceRule("a", "mono", "src/a/**"),))
    assert resolve_service("mono", "README.md", smap) == UNMAPPED
    strict = ServiceMap(smap.rules, "error")
    with pytest.raises(UnmappedFile):
        resolve_service("mono", "README.md", strict)


@pytest.mark.parametrize("pattern, text, ok", [
    ("**", "a/b/c.txt", True),
    ("src/*.py", "src/x.py", True),
    ("src/*.py", "src/a/x.py", False),
    ("src/**/*.py", "src/x.py", True),
    ("src/**/*.py", "src/a/b/x.py", True),
    ("svc-?", "svc-1", True),
    ("svc-?", "svc-10", False),
    ("a.b", "axb", False),
])
def test_glob_semantics(pattern, text, ok):
    assert glob_match(pattern, text) is ok


def test_service_map_validation(tmp_path):
    with pytest.raises(InvalidServiceMap):
        ServiceMap(())
    with pytest.raises(InvalidServiceMap):
        ServiceMap((ServiceRule("a", "*"),), "sometimes")
    p = tmp_path / "map.yaml"
    p.write_text("unmapped_policy: error\nrules:\n  - {service: gate, repo_pattern: gate}\n")
    smap = load_service_map(p)
    assert smap.unmapped_policy == "error"
    assert smap.rules == (ServiceRule("gate", "gate", "**"),)
    p.write_text(json.dumps({"rules": [{"repo_pattern": "x"}]}))
    with pytest.raises(InvalidServiceMap):
        load_service_map(p)


# ---------------------------------------------------------------- commit log

def test_commit_log_round_trip(tmp_path):
    commits = [
        make_commit("c1", "ann", 0, [("a/x.py", 3, 1), ("a/img.bin", 0, 0)]),
        make_commit("c2", "bob", 1, []),
    ]
    path = tmp_path / "log.jsonl"
    assert write_commit_log(commits, path) == 2
    first = json.loads(path.read_text().splitlines()[0])
    assert first["timestamp"] == "2020-01-01T00:00:00Z"
    assert first["files"][1] == {"path": "a/img.bin", "additions": 0, "deletions": 0,
                                 "binary": True}
    assert read_commit_log(path) == commits


def test_commit_log_errors(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"sha": "zz", "repo": "r", "timestamp": "2020-01-01T00:00:00Z"}\n')
    with pytest.raises(MalformedCommitLog, match="bad.jsonl:1"):
        read_commit_log(path)
    path.write_text("{not json\n")
    with pytest.raises(MalformedCommitLog):
        read_commit_log(path)


def test_parse_timestamp_normalizes_to_utc():
    assert parse_timestamp("2017-06-05") == datetime(2017, 6, 5, tzinfo=timezone.utc)
    assert parse_timestamp("2017-06-05T02:00:00+02:00") == datetime(2017, 6, 5, tzinfo=timezone.utc)


def test_file_change_invariants():
    with pytest.raises(ValueError):
        FileChange("", 1, 1)
    with pytest.raises(ValueError):
        FileChange("a", -1, 0)
    assert FileChange("a", 3, 1).churn == 4


def test_malformed_numstat():
    header = f"\x1e{sha('x')}\x1f\x1fA\x1fa@b\x1f0\x00\n"
    with pytest.raises(MalformedNumstat, match="three"):
        parse_git_log(header + "three\tcolumns\0", "r")
    with pytest.raises(MalformedNumstat):
        parse_git_log(header + "x\t1\tpath\0", "r")


# ------------------------------------------------------------ git extraction

def numstat_oracle(path):
    """Independent reading of plain `git log --numstat` (no -z)."""
    out = subprocess.run(["git", "-C", str(path), "log", "--no-merges", "--no-renames",
                          "--numstat", "--format=@%H"], capture_output=True, text=True,
                         check=True).stdout
    result, current = {}, None
    for line in out.splitlines():
        if line.startswith("@"):
            current = line[1:]
            result[current] = []
        elif line.strip():
            a, d, p = line.split("\t")
            result[current].append((p, 0 if a == "-" else int(a), 0 if d == "-" else int(d)))
    return result


@requires_git
def test_extract_empty_repo(git_repo):
    assert extract_from_git(git_repo().path, "empty") == []


@requires_git
def test_extract_not_a_repo(tmp_path):
    with pytest.raises(RepoNotFound):
        extract_from_git(tmp_path / "missing")
    (tmp_path / "plain").mkdir()
    with pytest.raises(RepoNotFound):
        extract_from_git(tmp_path / "plain")


@requires_git
def test_extract_churn_matches_numstat(git_repo):
    repo = git_repo()
    repo.commit({"one.txt": "old\n", "two.txt": "x\ny\n"}, when="2020-01-01T00:00:00Z")
    head = repo.commit({"one.txt": "n1\nn2\nn3\n", "two.txt": ""}, author="Bo",
                       email="Bo@Example.org", when="2020-01-02T03:04:05Z")
    commits = extract_from_git(repo.path, "svc")
    assert len(commits) == 2
    last = commits[0]
    assert last.sha == head
    assert last.repo == "svc"
    assert last.author_email == "Bo@Example.org"
    assert last.timestamp == datetime(2020, 1, 2, 3, 4, 5, tzinfo=timezone.utc)
    assert [(c.path, c.additions, c.deletions) for c in last.changes] == [
        ("one.txt", 3, 1), ("two.txt", 0, 2)]
    assert sum(c.additions for c in last.changes) == 3
    assert sum(c.churn for c in last.changes) == 6
    oracle = numstat_oracle(repo.path)
    for c in commits:
        assert sorted((f.path, f.additions, f.deletions) for f in c.changes) == sorted(oracle[c.sha])


@requires_git
def test_extract_binary_and_rename(git_repo):
    repo = git_repo()
    repo.commit({"img.png": b"\x00\x01\x02", "old.txt": "1\n2\n"})
    repo.git("mv", "old.txt", "new.txt")
    repo.commit({"img.png": b"\x00\x09"})
    newest = extract_from_git(repo.path)[0]
    changes = {c.path: c for c in newest.changes}
    assert changes["img.png"].binary and changes["img.png"].churn == 0
    assert (changes["old.txt"].deletions, changes["new.txt"].additions) == (2, 2)


@requires_git
def test_extract_merges(git_repo):
    repo = git_repo()
    repo.commit({"a.txt": "1\n"}, when="2020-01-01T00:00:00Z")
    repo.git("checkout", "-q", "-b", "feature")
    repo.commit({"b.txt": "1\n2\n"}, when="2020-01-02T00:00:00Z")
    repo.git("checkout", "-q", "main")
    repo.commit({"c.txt": "1\n"}, when="2020-01-03T00:00:00Z")
    env = {"GIT_AUTHOR_NAME": "M", "GIT_AUTHOR_EMAIL": "m@x.org",
           "GIT_AUTHOR_DATE": "2020-01-04T00:00:00Z", "GIT_COMMITTER_NAME": "M",
           "GIT_COMMITTER_EMAIL": "m@x.org", "GIT_COMMITTER_DATE": "2020-01-04T00:00:00Z"}
    repo.git("merge", "-q", "--no-ff", "feature", "-m", "merge", env=env)
    merge_sha = repo.git("rev-parse", "HEAD").strip()

    plain = extract_from_git(repo.path)
    assert merge_sha not in {c.sha for c in plain}
    # first-parent walk: the feature-branch commit is not reached
    assert len(plain) == 2

    merged = extract_from_git(repo.path, include_merges=True)
    merge = next(c for c in merged if c.sha == merge_sha)
    assert [(c.path, c.additions) for c in merge.changes] == [("b.txt", 2)]


# ------------------------------------------------------------------- history

SMAP = ServiceMap((ServiceRule("a", "*", "a/**"), ServiceRule("b", "*", "b/**")))


def test_load_history_union_sorted():
    c1 = make_commit("1", "ann", 5, [("a/x", 1, 0)])
    c2 = make_commit("2", "bob", 1, [("b/x", 1, 0)])
    h = load_history([c1, c2], SMAP)
    assert [c.sha for c in h.commits] == [c2.sha, c1.sha]
    assert h.services == ("a", "b")
    assert h.commits[0].author_canonical == "bob"


def test_load_history_dedup_and_conflict(tmp_path):
    c1 = make_commit("1", "ann", 0, [("a/x", 1, 0)])
    c2 = make_commit("2", "ann", 1, [("b/x", 2, 0)])
    write_commit_log([c1, c2], tmp_path / "one.jsonl")
    write_commit_log([c2], tmp_path / "two.jsonl")
    h = load_history([tmp_path / "one.jsonl", tmp_path / "two.jsonl"], SMAP)
    assert len(h) == 2

    altered = make_commit("2", "ann", 1, [("b/x", 3, 0)])
    write_commit_log([altered], tmp_path / "three.jsonl")
    with pytest.raises(DuplicateShaConflict):
        load_history([tmp_path / "one.jsonl", tmp_path / "three.jsonl"], SMAP)


def test_load_history_interleaved_order():
    # hand-sorted: ties on timestamp break by repo then sha
    fixture = [
        make_commit("p", "ann", 3, [("a/x", 1, 0)], repo="zeta"),
        make_commit("q", "ann", 1, [("a/x", 1, 0)], repo="zeta"),
        make_commit("r", "bob", 1, [("b/x", 1, 0)], repo="alpha"),
        make_commit("s", "bob", 2, [("b/x", 1, 0)], repo="alpha"),
        make_commit("t", "bob", 3, [("b/x", 1, 0)], repo="alpha"),
    ]
    expected = [("alpha", sha("r")), ("zeta", sha("q")), ("alpha", sha("s")),
                ("alpha", sha("t")), ("zeta", sha("p"))]
    for ordering in (fixture, fixture[::-1]):
        h = load_history(ordering, SMAP)
        assert [(c.repo, c.sha) for c in h.commits] == expected


def test_load_history_drops_anonymous_commits():
    anon = make_commit("anon", "x", 0, [("a/x", 1, 0)])
    anon = type(anon)(anon.sha, anon.repo, "", "", anon.timestamp, anon.changes)
    h = load_history([anon, make_commit("ok", "ann", 1, [("a/y", 1, 0)])], SMAP)
    assert len(h) == 1


def test_load_history_unmapped_error_propagates():
    strict = ServiceMap(SMAP.rules, "error")
    with pytest.raises(UnmappedFile):
        load_history([make_commit("1", "ann", 0, [("README", 1, 0)])], strict)


def test_load_history_missing_source(tmp_path):
    with pytest.raises(RepoNotFound):
        load_history([tmp_path / "nope.jsonl"], SMAP)


def test_summary_counts():
    h = load_history([
        make_commit("1", "ann", 0, [("a/x", 3, 1), ("README", 5, 0)]),
        make_commit("2", "bob", 1, [("b/x", 2, 2), ("a/y", 0, 1)]),
    ], SMAP)
    s = h.summary()
    assert (s["commits"], s["developers"], s["file_changes"], s["churn"]) == (2, 2, 4, 14)
    assert s["unmapped_churn"] == 5
    assert s["services"]["a"] == {"commits": 2, "churn": 5, "developers": 2}


commit_strategy = st.builds(
    lambda i, author, hours, files: make_commit(f"h{i}", author, hours, files),
    st.integers(0, 10_000),
    st.sampled_from(["ann", "bob", "cy"]),
    st.integers(0, 50),
    st.lists(st.tuples(st.sampled_from(["a/x", "b/y", "c/z", "README"]),
                       st.integers(0, 20), st.integers(0, 20)),
             max_size=4, unique_by=lambda f: f[0]),
)


@given(st.lists(commit_strategy, max_size=25, unique_by=lambda c: c.sha), st.randoms())
def test_history_properties(commits, rnd):
    h = load_history(commits, SMAP)
    # ordering
    keys = [c.sort_key for c in h.commits]
    assert keys == sorted(keys)
    # determinism under source permutation
    shuffled = list(commits)
    rnd.shuffle(shuffled)
    assert load_history(shuffled, SMAP) == h
    # churn conservation
    s = h.summary()
    per_service = sum(v["churn"] for v in s["services"].values())
    assert per_service + s["unmapped_churn"] == sum(
        f.churn for c in commits for f in c.changes)
    # every reported service is observed in a mapped change
    for svc in h.services:
        assert any(ch.service == svc for c in h.commits for ch in c.changes)

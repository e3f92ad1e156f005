"""Seeded synthetic histories and a naive coupling oracle.

The generator draws from SplitMix64 (Steele, Lea & Flood, 2014) with the
derivations below, so a seed yields the same history in any language:

* ``u64``: the standard SplitMix64 step, golden gamma ``0x9E3779B97F4A7C15``;
* ``random()``: ``(u64 >> 11) * 2**-53``;
* ``below(n)``: ``(u64 * n) >> 64``.

Per commit, in order: the gap to the previous timestamp, the author, whether
it is a cross-service commit, the foreign service, whether it also touches the
home service, then the files.

The oracle reads only the history data types; it shares no code with the
coupling pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

from .history import CommitRecord, FileChange, History, ServiceMap, ServiceRule, load_history

_MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK

    def u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.u64() >> 11) * 2.0**-53

    def below(self, n: int) -> int:
        return (self.u64() * n) >> 64

    def between(self, lo: int, hi: int) -> int:
        """Uniform integer in ``[lo, hi]``."""
        return lo + self.below(hi - lo + 1)


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 0
    n_services: int = 3
    n_developers: int = 4
    n_commits: int = 50
    cross_contribution_rate: float = 0.3
    both_touch_rate: float = 0.3
    churn_range: tuple[int, int] = (0, 40)
    binary_rate: float = 0.05
    start: datetime = datetime(2017, 6, 5, tzinfo=timezone.utc)
    max_gap: timedelta = timedelta(days=3)

    def __post_init__(self) -> None:
        for rate in (self.cross_contribution_rate, self.both_touch_rate, self.binary_rate):
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"rate {rate} outside [0, 1]")
        if min(self.n_services, self.n_developers, self.n_commits) < 1:
            raise ValueError("counts must be >= 1")
        lo, hi = self.churn_range
        if not 0 <= lo <= hi:
            raise ValueError(f"invalid churn range {self.churn_range}")
        if self.max_gap < timedelta(seconds=1):
            raise ValueError("max_gap must be at least one second")


def service_names(n: int) -> list[str]:
    return [f"svc{i:02d}" for i in range(n)]


def developer_names(n: int) -> list[str]:
    return [f"dev{i:02d}" for i in range(n)]


def synth_service_map(spec: SynthSpec) -> ServiceMap:
    """Map for generated commits: everything lives in repo ``synth`` under ``src/<svc>/``."""
    return ServiceMap(
        tuple(ServiceRule(s, "synth", f"src/{s}/**") for s in service_names(spec.n_services))
    )


def generate_commits(spec: SynthSpec) -> list[CommitRecord]:
    """Raw commits (no canonical ids, no service tags)."""
    rng = SplitMix64(spec.seed)
    services = service_names(spec.n_services)
    devs = developer_names(spec.n_developers)
    home = {d: services[i % len(services)] for i, d in enumerate(devs)}
    lo, hi = spec.churn_range
    max_gap = int(spec.max_gap.total_seconds())

    def files(service: str) -> list[FileChange]:
        out = []
        for j in range(1 + rng.below(3)):
            path = f"src/{service}/f{rng.below(8)}_{j}.py"
            if rng.random() < spec.binary_rate:
                out.append(FileChange(path.replace(".py", ".bin"), 0, 0, binary=True))
            else:
                out.append(FileChange(path, rng.between(lo, hi), rng.between(lo, hi)))
        return out

    commits = []
    ts = spec.start
    for i in range(spec.n_commits):
        ts = ts + timedelta(seconds=rng.between(1, max_gap))
        dev = devs[rng.below(len(devs))]
        targets = [home[dev]]
        if len(services) > 1 and rng.random() < spec.cross_contribution_rate:
            others = [s for s in services if s != home[dev]]
            foreign = others[rng.below(len(others))]
            targets = [home[dev], foreign] if rng.random() < spec.both_touch_rate else [foreign]
        changes = []
        for svc in targets:
            changes.extend(files(svc))
        sha = f"{rng.u64():016x}{rng.u64():016x}{i:08x}"
        commits.append(
            CommitRecord(
                sha=sha,
                repo="synth",
                author_name=dev.upper(),
                author_email=f"{dev}@example.org",
                timestamp=ts,
                changes=tuple(changes),
            )
        )
    return commits


def generate_history(spec: SynthSpec) -> History:
    """Deterministic synthetic history with services ``svc00``, ``svc01``, ..."""
    return load_history(generate_commits(spec), synth_service_map(spec))


def oracle_oc(history: History, pair: tuple[str, str]) -> float:
    """Pair coupling recomputed from raw commits with no shared pipeline code."""
    a, b = pair
    team_a = set()
    team_b = set()
    for commit in history.commits:
        for ch in commit.changes:
            if ch.service == a:
                team_a.add(commit.author_canonical)
            if ch.service == b:
                team_b.add(commit.author_canonical)

    total = 0.0
    for dev in sorted(team_a & team_b):
        ca = 0
        cb = 0
        marks = []
        for commit in history.commits:
            if commit.author_canonical != dev:
                continue
            in_a = False
            in_b = False
            for ch in commit.changes:
                if ch.service == a:
                    in_a = True
                    ca += ch.additions + ch.deletions
                elif ch.service == b:
                    in_b = True
                    cb += ch.additions + ch.deletions
            if in_a and in_b:
                marks.append("ab")
            elif in_a:
                marks.append("a")
            elif in_b:
                marks.append("b")
        k = 0
        for i in range(1, len(marks)):
            if marks[i] == "ab":
                k += 2
            elif marks[i] not in marks[i - 1]:
                k += 1
        s = k / (2 * (len(marks) - 1)) if len(marks) > 1 else 0.0
        hm = 2 * ca * cb / (ca + cb) if ca + cb > 0 else 0.0
        total += hm * s
    return total

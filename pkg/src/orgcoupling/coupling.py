"""Organizational coupling between microservices.

For a service pair (a, b) and a developer D who belongs to both teams:

* D's commits touching a or b, in global commit order, form the pair
  sub-sequence of length ``n``;
* ``k`` counts contribution switches along it (see :func:`count_switches`);
* the switch weight is ``S = k / (2 (n - 1))``, in [0, 1];
* D's coupling is ``HM(CA, CB) * S`` where CA and CB are D's churn on a and b
  within the sub-sequence and ``HM(x, y) = 2xy / (x + y)``.

The coupling of the pair is the sum over all shared developers.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from datetime import datetime
from itertools import combinations

import numpy as np

from .errors import EmptyTouchSet, InconsistentCounts, NegativeValue
from .history import CommitRecord, History

SwitchRule = Callable[[Sequence[frozenset]], int]


class Band(str, enum.Enum):
    VERY_HIGH = "VeryHigh"
    HIGH = "High"
    LOOSE = "Loose"
    VERY_LOOSE = "VeryLoose"

    @property
    def color(self) -> str:
        return _BAND_COLORS[self]

    @property
    def label(self) -> str:
        return _BAND_LABELS[self]


_BAND_COLORS = {
    Band.VERY_HIGH: "red",
    Band.HIGH: "orange",
    Band.LOOSE: "yellow",
    Band.VERY_LOOSE: "green",
}
_BAND_LABELS = {
    Band.VERY_HIGH: "Very Highly Coupled",
    Band.HIGH: "Highly Coupled",
    Band.LOOSE: "Loosely Coupled",
    Band.VERY_LOOSE: "Very Loosely Coupled",
}

# inclusive lower bounds, highest first
BAND_THRESHOLDS = ((10_000.0, Band.VERY_HIGH), (1_000.0, Band.HIGH), (100.0, Band.LOOSE))


def classify(oc: float) -> Band:
    if oc < 0 or math.isnan(oc):
        raise NegativeValue(f"coupling must be non-negative, got {oc}")
    for bound, band in BAND_THRESHOLDS:
        if oc >= bound:
            return band
    return Band.VERY_LOOSE


def count_switches(touched_seq: Sequence[frozenset]) -> int:
    """Count contribution switches in a sequence of touched-service sets.

    The first commit contributes nothing.  After that, a commit touching both
    services counts two switches, and a single-service commit counts one
    switch when that service was not touched by the previous commit.  This is
    the simplest per-commit rule that gives 8 switches for
    ``[a, b, ab, ab, a, b, a, b]`` and 14 for eight ``ab`` commits.
    """
    k = 0
    prev: frozenset | None = None
    for touched in touched_seq:
        if not touched:
            raise EmptyTouchSet("every commit in a pair sequence must touch a service")
        if len(touched) > 2:
            raise EmptyTouchSet(f"touch set {set(touched)} is not a subset of a pair")
        if prev is not None:
            if len(touched) == 2:
                k += 2
            elif not touched <= prev:
                k += 1
        prev = touched
    return k


def switch_weight(n: int, k: int) -> float:
    if k < 0 or k > 2 * max(n - 1, 0):
        raise InconsistentCounts(f"{k} switches impossible over {n} commits")
    if n <= 1:
        return 0.0
    return k / (2 * (n - 1))


def harmonic_mean(x: float, y: float) -> float:
    if x + y == 0:
        return 0.0
    return 2 * x * y / (x + y)


@dataclass(frozen=True)
class SwitchSequence:
    developer: str
    pair: tuple[str, str]
    commits: tuple[tuple[str, frozenset], ...]
    k: int

    @property
    def n(self) -> int:
        return len(self.commits)

    @property
    def weight(self) -> float:
        return switch_weight(self.n, self.k)


@dataclass(frozen=True)
class DeveloperCoupling:
    developer: str
    pair: tuple[str, str]
    contribution_a: int
    contribution_b: int
    n: int
    k: int
    switch_weight: float
    oc: float


def _pair_commits(commits: Sequence[CommitRecord], a: str, b: str):
    pair = {a, b}
    for c in commits:
        churn = c.churn_by_service()
        touched = frozenset(pair.intersection(churn))
        if touched:
            yield c, touched, churn


def _developer_commits(history: History, developer: str) -> list[CommitRecord]:
    return [c for c in history.commits if c.author_canonical == developer]


def pair_sequence(
    history: History,
    developer: str,
    pair: tuple[str, str],
    rule: SwitchRule = count_switches,
) -> SwitchSequence:
    a, b = pair
    if a == b:
        raise ValueError("a service pair needs two distinct services")
    items = list(_pair_commits(_developer_commits(history, developer), a, b))
    touched = [t for _, t, _ in items]
    return SwitchSequence(
        developer, (a, b), tuple((c.sha, t) for c, t, _ in items), rule(touched) if touched else 0
    )


def _developer_oc(
    commits: Sequence[CommitRecord], developer: str, a: str, b: str, rule: SwitchRule
) -> DeveloperCoupling:
    ca = cb = 0
    touched = []
    for _, t, churn in _pair_commits(commits, a, b):
        touched.append(t)
        ca += churn.get(a, 0)
        cb += churn.get(b, 0)
    n = len(touched)
    k = rule(touched) if touched else 0
    s = switch_weight(n, k)
    return DeveloperCoupling(developer, (a, b), ca, cb, n, k, s, harmonic_mean(ca, cb) * s)


def developer_oc(
    history: History,
    developer: str,
    pair: tuple[str, str],
    rule: SwitchRule = count_switches,
) -> DeveloperCoupling:
    a, b = pair
    if a == b:
        raise ValueError("a service pair needs two distinct services")
    return _developer_oc(_developer_commits(history, developer), developer, a, b, rule)


@dataclass(frozen=True)
class CouplingMatrix:
    """Symmetric pairwise coupling over an ordered service list."""

    services: tuple[str, ...]
    values: np.ndarray
    shared: np.ndarray
    details: dict[tuple[str, str], tuple[DeveloperCoupling, ...]] = field(
        default_factory=dict, repr=False, compare=False
    )

    def index(self, service: str) -> int:
        return self.services.index(service)

    def oc(self, a: str, b: str) -> float:
        return float(self.values[self.index(a), self.index(b)])

    def band(self, a: str, b: str) -> Band:
        return classify(self.oc(a, b))

    def pairs(self):
        """Yield ``(a, b, oc, band, shared_developers)`` for each unordered pair."""
        for i, j in combinations(range(len(self.services)), 2):
            v = float(self.values[i, j])
            yield self.services[i], self.services[j], v, classify(v), int(self.shared[i, j])

    def developers(self, a: str, b: str) -> tuple[DeveloperCoupling, ...]:
        """Per-developer diagnostics for the pair, oriented as (a, b)."""
        if (a, b) in self.details:
            return self.details[(a, b)]
        return tuple(
            DeveloperCoupling(
                d.developer, (a, b), d.contribution_b, d.contribution_a, d.n, d.k,
                d.switch_weight, d.oc,
            )
            for d in self.details.get((b, a), ())
        )

    def reindex(self, services: Sequence[str]) -> CouplingMatrix:
        """Align onto *services*; services absent here get zero rows/columns."""
        services = tuple(services)
        missing = set(self.services) - set(services)
        if missing:
            raise ValueError(f"target ordering lacks services {sorted(missing)}")
        n = len(services)
        values = np.zeros((n, n))
        shared = np.zeros((n, n), dtype=np.int64)
        pos = [services.index(s) for s in self.services]
        if pos:
            values[np.ix_(pos, pos)] = self.values
            shared[np.ix_(pos, pos)] = self.shared
        return CouplingMatrix(services, values, shared, self.details)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CouplingMatrix):
            return NotImplemented
        return (
            self.services == other.services
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.shared, other.shared)
        )

    __hash__ = None


def coupling_matrix(
    history: History,
    cutoff: datetime | None = None,
    services: Sequence[str] | None = None,
    rule: SwitchRule = count_switches,
) -> CouplingMatrix:
    """Pairwise organizational coupling of every service pair.

    *cutoff* keeps commits at or before that instant.  *services* fixes the
    row order (defaults to the sorted services of the history).
    """
    history = history.until(cutoff)
    by_dev: dict[str, list[CommitRecord]] = {}
    teams: dict[str, set[str]] = {}
    for c in history.commits:
        by_dev.setdefault(c.author_canonical, []).append(c)
        for svc in c.services():
            teams.setdefault(svc, set()).add(c.author_canonical)

    order = tuple(services) if services is not None else history.services
    n = len(order)
    values = np.zeros((n, n))
    shared = np.zeros((n, n), dtype=np.int64)
    details = {}
    for i, j in combinations(range(n), 2):
        a, b = order[i], order[j]
        both = sorted(teams.get(a, set()) & teams.get(b, set()))
        devs = tuple(_developer_oc(by_dev[d], d, a, b, rule) for d in both)
        # fsum is exact, so the result does not depend on developer order
        total = math.fsum(d.oc for d in devs)
        values[i, j] = values[j, i] = total
        shared[i, j] = shared[j, i] = len(both)
        details[(a, b)] = devs
    return CouplingMatrix(order, values, shared, details)

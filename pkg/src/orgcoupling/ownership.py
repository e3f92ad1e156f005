"""Microservice teams and ownership profiles.

A developer's contribution to a service is the churn (lines added plus lines
deleted) of their commits to the service's files.  Ownership is the share of
the service's total churn; the developer(s) with the largest share are the
Teamleader(s), any other developer at or above 5% is a Major contributor and
the rest are Minor contributors.
"""

from __future__ import annotations

import enum
from collections.abc import Mapping
from dataclasses import dataclass
from fractions import Fraction

from .errors import UnknownService, ZeroContribution
from .history import History

MAJOR_THRESHOLD = Fraction(1, 20)


class Role(str, enum.Enum):
    TEAMLEADER = "Teamleader"
    MAJOR = "Major"
    MINOR = "Minor"


@dataclass(frozen=True)
class Contribution:
    contribution: int
    commit_count: int


class ContributionLedger(Mapping):
    """Read-only mapping ``(service, developer) -> Contribution``."""

    def __init__(self, entries: Mapping[tuple[str, str], Contribution]):
        self._entries = dict(sorted(entries.items()))

    def __getitem__(self, key: tuple[str, str]) -> Contribution:
        return self._entries[key]

    def __iter__(self):
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __repr__(self) -> str:
        return f"ContributionLedger({len(self)} entries)"

    @property
    def services(self) -> tuple[str, ...]:
        return tuple(sorted({s for s, _ in self._entries}))

    def service_entries(self, service: str) -> dict[str, Contribution]:
        entries = {d: c for (s, d), c in self._entries.items() if s == service}
        if not entries:
            raise UnknownService(f"no contributions recorded for service {service!r}")
        return entries


def build_ledger(history: History) -> ContributionLedger:
    churn: dict[tuple[str, str], int] = {}
    commits: dict[tuple[str, str], int] = {}
    for commit in history.commits:
        for service, lines in commit.churn_by_service().items():
            key = (service, commit.author_canonical)
            churn[key] = churn.get(key, 0) + lines
            commits[key] = commits.get(key, 0) + 1
    return ContributionLedger({k: Contribution(churn[k], commits[k]) for k in churn})


@dataclass(frozen=True)
class OwnershipEntry:
    developer: str
    contribution: int
    ownership: float
    role: Role


@dataclass(frozen=True)
class OwnershipProfile:
    service: str
    entries: tuple[OwnershipEntry, ...]

    @property
    def total(self) -> int:
        return sum(e.contribution for e in self.entries)

    @property
    def leaders(self) -> tuple[OwnershipEntry, ...]:
        return tuple(e for e in self.entries if e.role is Role.TEAMLEADER)

    @property
    def majors(self) -> tuple[OwnershipEntry, ...]:
        """Major contributors, Teamleaders included."""
        return tuple(e for e in self.entries if e.role is not Role.MINOR)

    def role_of(self, developer: str) -> Role:
        for e in self.entries:
            if e.developer == developer:
                return e.role
        raise KeyError(developer)


def ownership_profile(ledger: ContributionLedger, service: str) -> OwnershipProfile:
    entries = ledger.service_entries(service)
    total = sum(c.contribution for c in entries.values())
    if total == 0:
        raise ZeroContribution(f"service {service!r} has no line churn")
    top = max(c.contribution for c in entries.values())

    # roles are decided on exact integer ratios so they are scale invariant
    def role(amount: int) -> Role:
        if amount == top:
            return Role.TEAMLEADER
        if Fraction(amount, total) >= MAJOR_THRESHOLD:
            return Role.MAJOR
        return Role.MINOR

    ranked = sorted(entries.items(), key=lambda kv: (-kv[1].contribution, kv[0]))
    return OwnershipProfile(
        service,
        tuple(
            OwnershipEntry(dev, c.contribution, c.contribution / total, role(c.contribution))
            for dev, c in ranked
        ),
    )


def team_members(ledger: ContributionLedger, service: str) -> frozenset[str]:
    return frozenset(ledger.service_entries(service))


def all_profiles(ledger: ContributionLedger) -> dict[str, OwnershipProfile]:
    """Profiles of every service with positive churn."""
    out = {}
    for service in ledger.services:
        try:
            out[service] = ownership_profile(ledger, service)
        except ZeroContribution:
            continue
    return out

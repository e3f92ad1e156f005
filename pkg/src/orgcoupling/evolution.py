"""Coupling over consecutive time windows."""

from __future__ import annotations

import warnings
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .coupling import CouplingMatrix, coupling_matrix
from .errors import EmptyWindowSeries, TooFewWindows
from .history import History

DEFAULT_WIDTH = timedelta(days=365)


@dataclass(frozen=True)
class WindowSpec:
    """``count`` half-open windows ``[start + i*width, start + (i+1)*width)``.

    Use :meth:`from_boundaries` for windows with explicit edges (e.g.
    anniversaries that straddle leap days).
    """

    start: datetime
    width: timedelta = DEFAULT_WIDTH
    count: int = 1
    boundaries: tuple[datetime, ...] | None = None

    def __post_init__(self) -> None:
        if self.boundaries is not None:
            if len(self.boundaries) < 2 or any(
                lo >= hi for lo, hi in zip(self.boundaries, self.boundaries[1:])
            ):
                raise ValueError("window boundaries must be strictly increasing, at least two")
            return
        if self.width <= timedelta(0):
            raise ValueError("window width must be positive")
        if self.count < 1:
            raise ValueError("need at least one window")

    @classmethod
    def from_boundaries(cls, boundaries: Sequence[datetime]) -> WindowSpec:
        b = tuple(boundaries)
        return cls(start=b[0], width=b[1] - b[0] if len(b) > 1 else DEFAULT_WIDTH,
                   count=max(len(b) - 1, 1), boundaries=b)

    def intervals(self) -> list[tuple[datetime, datetime]]:
        if self.boundaries is not None:
            return list(zip(self.boundaries, self.boundaries[1:]))
        return [
            (self.start + i * self.width, self.start + (i + 1) * self.width)
            for i in range(self.count)
        ]


@dataclass(frozen=True)
class EvolutionSeries:
    windows: tuple[tuple[tuple[datetime, datetime], CouplingMatrix], ...]
    services: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.windows)

    @property
    def matrices(self) -> list[CouplingMatrix]:
        return [m for _, m in self.windows]

    def stack(self) -> np.ndarray:
        """Values as an array of shape (windows, services, services)."""
        n = len(self.services)
        if not self.windows:
            return np.zeros((0, n, n))
        return np.stack([m.values for m in self.matrices])


def windowed_matrices(history: History, spec: WindowSpec, jobs: int = 1) -> EvolutionSeries:
    """Recompute teams and coupling from each window's commits alone."""
    intervals = spec.intervals()
    slices = [history.between(lo, hi) for lo, hi in intervals]
    if not any(len(s) for s in slices):
        warnings.warn("no commit falls inside any window", EmptyWindowSeries, stacklevel=2)
    services = tuple(sorted({svc for s in slices for svc in s.services}))
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        matrices = list(pool.map(lambda s: coupling_matrix(s).reindex(services), slices))
    return EvolutionSeries(tuple(zip(intervals, matrices)), services)


def series_delta(series: EvolutionSeries) -> np.ndarray:
    """``delta[i] = OC[i+1] - OC[i]``, shape (windows - 1, services, services)."""
    if len(series) < 2:
        raise TooFewWindows("need at least two windows for deltas")
    return np.diff(series.stack(), axis=0)

"""Simple-random-walk path primitives: paths, local time, overlap, the
difference walk, return-time distributions, and admissible path sets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

Interval = Tuple[int, int]


def iround(x: float) -> int:
    """Round to the nearest integer, halves up.

    Single rounding rule for every sqrt(N)-derived quantity (windows, boxes,
    thresholds) so the lattice geometry is consistent across modules.
    """
    return int(np.floor(x + 0.5))


@dataclass(frozen=True)
class SSRW:
    """Symmetric simple random walk: steps +-1 with probability 1/2 each."""

    step_probs = ((-1, 0.5), (1, 0.5))


@dataclass(frozen=True)
class DifferenceWalk:
    """Difference of two independent simple walks.

    Steps are -2, 0, +2 with probabilities 1/4, 1/2, 1/4: a lazy walk with
    hold probability q = 1/2, jump probability p = 1/2 and jump size b = 2.
    The overlap of two walks equals the local time of this walk at 0.
    """

    step_probs = ((-2, 0.25), (0, 0.5), (2, 0.25))
    p = 0.5
    q = 0.5
    b = 2


@dataclass(frozen=True)
class WalkPath:
    """Nearest-neighbour path: a start height plus a sequence of +-1 steps.

    Time index 0 carries the start and never contributes to local time or
    overlap; all occupation counts run over times 1..N.
    """

    start: int
    steps: Tuple[int, ...]

    def __post_init__(self):
        if any(s not in (-1, 1) for s in self.steps):
            raise ValueError("steps must be +1 or -1")

    @property
    def length(self) -> int:
        return len(self.steps)

    def positions(self) -> np.ndarray:
        """Heights at times 0..N (index 0 is the start)."""
        pos = np.empty(len(self.steps) + 1, dtype=np.int64)
        pos[0] = self.start
        if self.steps:
            pos[1:] = self.start + np.cumsum(self.steps)
        return pos


def local_time(path: WalkPath) -> int:
    """Number of visits to height 0 at times 1..N."""
    return int(np.count_nonzero(path.positions()[1:] == 0))


def overlap(path1: WalkPath, path2: WalkPath) -> int:
    """Number of times 1..N at which the two paths occupy the same height."""
    if path1.length != path2.length:
        raise ValueError("paths must have equal length")
    return int(np.count_nonzero(path1.positions()[1:] == path2.positions()[1:]))


@dataclass(frozen=True)
class PathConstraint:
    """Declarative admissible path set.

    The start window constrains the height at time 0, the box constrains
    heights at times 1..N, and the end window (or exact end point) constrains
    the height at time N.  ``box`` or ``end_window`` set to None means
    unconstrained.
    """

    length: int
    start_window: Interval
    box: Optional[Interval] = None
    end_window: Optional[Interval] = None
    end_point: Optional[int] = None

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("length must be >= 1")
        for name in ("start_window", "box", "end_window"):
            iv = getattr(self, name)
            if iv is not None and iv[0] > iv[1]:
                raise ValueError(f"{name} has lo > hi")

    def admits(self, path: WalkPath) -> bool:
        """Pure predicate: literal re-check of every position."""
        if path.length != self.length:
            return False
        pos = path.positions()
        if not (self.start_window[0] <= pos[0] <= self.start_window[1]):
            return False
        if self.box is not None:
            inner = pos[1:]
            if inner.min() < self.box[0] or inner.max() > self.box[1]:
                return False
        if self.end_window is not None:
            if not (self.end_window[0] <= pos[-1] <= self.end_window[1]):
                return False
        if self.end_point is not None and pos[-1] != self.end_point:
            return False
        return True

    @staticmethod
    def free(n: int, start: int = 0) -> "PathConstraint":
        """Unconstrained paths from a fixed start height."""
        return PathConstraint(length=n, start_window=(start, start))

    @staticmethod
    def pinned(n: int, start: int = 0, end: int = 0) -> "PathConstraint":
        """Paths from a fixed start conditioned to end at a fixed height."""
        return PathConstraint(length=n, start_window=(start, start), end_point=end)

    @staticmethod
    def link(n: int, direction: str) -> "PathConstraint":
        """One coarse-grained block crossing, in block-local coordinates.

        Paths start within sqrt(N)/4 of the axis, stay inside the +-2 sqrt(N)
        box, and end within sqrt(N)/4 of -sqrt(N), 0 or +sqrt(N) according to
        ``direction`` in {"down", "forward", "up"}.
        """
        s = iround(np.sqrt(n))
        w = iround(s / 4)
        centers = {"up": s, "forward": 0, "down": -s}
        if direction not in centers:
            raise ValueError(f"unknown direction {direction!r}")
        c = centers[direction]
        return PathConstraint(
            length=n,
            start_window=(-w, w),
            box=(-2 * s, 2 * s),
            end_window=(c - w, c + w),
        )

    @staticmethod
    def confined(n: int, start: int) -> "PathConstraint":
        """Stay in the +-2 sqrt(N) box and end within sqrt(N)/4 of the axis."""
        s = iround(np.sqrt(n))
        w = iround(s / 4)
        return PathConstraint(
            length=n,
            start_window=(start, start),
            box=(-2 * s, 2 * s),
            end_window=(-w, w),
        )


def hitting_time_pmf(walk, n_max: int) -> np.ndarray:
    """Exact first-return-to-0 probabilities P(tau_0 = n) for n = 1..n_max.

    Forward recursion over walks killed at 0: the returned vector has entry
    n-1 equal to P(tau_0 = n).  O(n_max^2) time, adequate for n_max <= 1e4.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    pmf = np.zeros(n_max)
    if isinstance(walk, SSRW):
        # Fold +-h symmetry onto h >= 1.  alive[k] = P(no return yet, |S_n| = n-2k... )
        # heights tracked densely: alive[h-1] for h = 1..n_max+1.
        alive = np.zeros(n_max + 2)
        alive[0] = 1.0  # after step 1: at |height| 1 with total mass 1
        for n in range(2, n_max + 1):
            hit = 0.5 * alive[0]
            new = np.empty_like(alive)
            new[0] = 0.5 * alive[1]
            new[1:-1] = 0.5 * (alive[:-2] + alive[2:])
            new[-1] = 0.0
            pmf[n - 1] = hit
            alive = new
        return pmf
    if isinstance(walk, DifferenceWalk):
        # Halve heights: lazy walk with steps -1, 0, +1 w.p. 1/4, 1/2, 1/4.
        pmf[0] = 0.5
        alive = np.zeros(n_max + 2)
        alive[0] = 0.5  # mass at |h| = 1 after the first step
        for n in range(2, n_max + 1):
            hit = 0.25 * alive[0]
            new = np.empty_like(alive)
            new[0] = 0.5 * alive[0] + 0.25 * alive[1]
            new[1:-1] = 0.25 * alive[:-2] + 0.5 * alive[1:-1] + 0.25 * alive[2:]
            new[-1] = 0.0
            pmf[n - 1] = hit
            alive = new
        return pmf
    raise TypeError(f"unsupported walk type {type(walk).__name__}")

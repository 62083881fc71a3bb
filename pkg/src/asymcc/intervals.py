"""Finite unions of half-open intervals and the measure pushdown pi_S.

``pi_forward(S, x)`` is the Lebesgue measure of [0, x] intersected with S.
``pi_inverse(S, y)`` returns a preimage of y that lies in S whenever one
exists: y on the image of a gap between two intervals resolves to the start
of the next interval (not the end of the previous one, which is outside a
half-open interval), and y = mu(S) for an open right end resolves to the
largest double below that end.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter


@dataclass(frozen=True)
class IntervalSet:
    """Sorted disjoint intervals [a, b); the last is [a, b] when ``closed_end``."""

    intervals: tuple[tuple[float, float], ...] = ()
    closed_end: bool = False
    _cum: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        prev = -np.inf
        for a, b in ivs:
            if not a < b:
                raise InvalidParameter(f"empty or reversed interval [{a}, {b})")
            if a < prev:
                raise InvalidParameter("intervals must be sorted and disjoint")
            prev = b
        cum = [0.0]
        for a, b in ivs:
            cum.append(cum[-1] + (b - a))
        object.__setattr__(self, "intervals", ivs)
        object.__setattr__(self, "_cum", tuple(cum))

    @classmethod
    def from_pieces(cls, pieces, closed_end: bool = False) -> "IntervalSet":
        """Merge touching [a, b) pieces (given in order) into maximal intervals."""
        merged: list[list[float]] = []
        for a, b in pieces:
            if b <= a:
                continue
            if merged and merged[-1][1] == a:
                merged[-1][1] = b
            else:
                merged.append([a, b])
        return cls(tuple(map(tuple, merged)), closed_end and bool(merged))

    @property
    def measure(self) -> float:
        return self._cum[-1]

    @property
    def inf(self) -> float:
        return self.intervals[0][0]

    def __len__(self):
        return len(self.intervals)

    def __contains__(self, x: float) -> bool:
        starts = [a for a, _ in self.intervals]
        i = bisect.bisect_right(starts, x) - 1
        if i < 0:
            return False
        a, b = self.intervals[i]
        if x < b:
            return True
        return self.closed_end and i == len(self.intervals) - 1 and x == b

    def to_list(self) -> list[list[float]]:
        return [list(iv) for iv in self.intervals]


def pi_forward(S: IntervalSet, x: float) -> float:
    """mu([0, x] & S); exact piecewise-linear evaluation."""
    starts = [a for a, _ in S.intervals]
    i = bisect.bisect_right(starts, x) - 1
    if i < 0:
        return 0.0
    a, b = S.intervals[i]
    return S._cum[i] + (min(x, b) - a)


def pi_inverse(S: IntervalSet, y: float) -> float:
    """A point t with pi_forward(S, t) == y, chosen inside S when possible."""
    mu = S.measure
    if y < 0 or y > mu:
        raise InvalidParameter(f"y={y} outside [0, mu(S)={mu}]")
    if not S.intervals:
        return 0.0
    cum = S._cum
    # first interval whose cumulative end exceeds y
    i = bisect.bisect_right(cum, y) - 1
    if i < len(S.intervals):
        a, b = S.intervals[i]
        t = a + (y - cum[i])
        # rounding can carry a + (y - cum) onto the open end b
        return t if t < b else _below(a, b)
    a, b = S.intervals[-1]
    if S.closed_end:
        return b
    return _below(a, b)


def _below(a: float, b: float) -> float:
    return max(a, float(np.nextafter(b, -np.inf)))


def pi_forward_array(S: IntervalSet, xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    if not S.intervals:
        return np.zeros_like(xs)
    a = np.array([iv[0] for iv in S.intervals])
    b = np.array([iv[1] for iv in S.intervals])
    return np.clip(xs[..., None] - a, 0.0, b - a).sum(axis=-1)

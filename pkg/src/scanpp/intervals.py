"""
Finite unions of real intervals with explicit endpoint closedness.

Used for rejection sets in center space, their point-space images and the
true-null center sets of the simulation designs. Lebesgue measures are
computed exactly from the merged endpoints (no grid approximation).
"""
from __future__ import annotations

import math
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class Interval(NamedTuple):
    """A single interval; ``[left, right)`` by default."""

    left: float
    right: float
    left_closed: bool = True
    right_closed: bool = False

    @property
    def empty(self) -> bool:
        if self.left > self.right:
            return True
        if self.left == self.right:
            return not (self.left_closed and self.right_closed)
        return False

    @property
    def length(self) -> float:
        return 0.0 if self.empty else self.right - self.left

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        lo = (x >= self.left) if self.left_closed else (x > self.left)
        hi = (x <= self.right) if self.right_closed else (x < self.right)
        return lo & hi

    def closed_repr(self) -> str:
        return "{}{!r}, {!r}{}".format(
            "[" if self.left_closed else "(",
            self.left,
            self.right,
            "]" if self.right_closed else ")",
        )


def _connected(a: Interval, b: Interval) -> bool:
    # a.left <= b.left assumed
    if b.left < a.right:
        return True
    if b.left == a.right:
        return a.right_closed or b.left_closed
    return False


class IntervalSet:
    """Disjoint, sorted union of intervals.

    Construction normalizes the input: empty pieces are dropped and pieces
    whose union is connected are merged.
    """

    __slots__ = ("intervals",)

    def __init__(self, intervals: Iterable[Interval] = ()):
        pieces = [Interval(*iv) for iv in intervals]
        pieces = [iv for iv in pieces if not iv.empty]
        # closed left endpoints sort first so that merging sees them
        pieces.sort(key=lambda iv: (iv.left, not iv.left_closed))
        merged: list[Interval] = []
        for iv in pieces:
            if merged and _connected(merged[-1], iv):
                last = merged[-1]
                if iv.right > last.right:
                    merged[-1] = Interval(last.left, iv.right, last.left_closed, iv.right_closed)
                elif iv.right == last.right and iv.right_closed and not last.right_closed:
                    merged[-1] = Interval(last.left, last.right, last.left_closed, True)
            else:
                merged.append(iv)
        self.intervals: tuple[Interval, ...] = tuple(merged)

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)

    def __bool__(self):
        return bool(self.intervals)

    def __eq__(self, other):
        if not isinstance(other, IntervalSet):
            return NotImplemented
        return self.intervals == other.intervals

    def __repr__(self):
        body = " U ".join(iv.closed_repr() for iv in self.intervals) or "{}"
        return f"IntervalSet({body})"

    @property
    def measure(self) -> float:
        return math.fsum(iv.length for iv in self.intervals)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=bool)
        for iv in self.intervals:
            out |= iv.contains(x)
        return out

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(self.intervals + tuple(other))

    def intersection(self, other: "IntervalSet") -> "IntervalSet":
        out = []
        for a in self.intervals:
            for b in other:
                if b.left > a.right:
                    break
                if a.left > b.left or (a.left == b.left and not a.left_closed):
                    left, lc = a.left, a.left_closed
                else:
                    left, lc = b.left, b.left_closed
                if a.left == b.left:
                    lc = a.left_closed and b.left_closed
                if a.right < b.right or (a.right == b.right and not a.right_closed):
                    right, rc = a.right, a.right_closed
                else:
                    right, rc = b.right, b.right_closed
                if a.right == b.right:
                    rc = a.right_closed and b.right_closed
                out.append(Interval(left, right, lc, rc))
        return IntervalSet(out)

    def complement(self, within: Interval) -> "IntervalSet":
        """Complement relative to the interval ``within``."""
        out = []
        left, lc = within.left, within.left_closed
        for iv in self.intervals:
            out.append(Interval(left, iv.left, lc, not iv.left_closed))
            left, lc = iv.right, not iv.right_closed
        out.append(Interval(left, within.right, lc, within.right_closed))
        return IntervalSet(out).intersection(IntervalSet([within]))

    def difference(self, other: "IntervalSet", within: Interval) -> "IntervalSet":
        return self.intersection(other.complement(within))

    def endpoints(self) -> np.ndarray:
        return np.array([[iv.left, iv.right] for iv in self.intervals], dtype=float).reshape(-1, 2)


def from_pairs(pairs: Sequence[Sequence[float]], left_closed=True, right_closed=False) -> IntervalSet:
    return IntervalSet(Interval(float(a), float(b), left_closed, right_closed) for a, b in pairs)

"""
Point samples, scanning-window geometry and the random partition of centers.

Windows have a fixed length ``eta`` and are indexed by their center ``x``::

    I(x) = (x - eta/2, x + eta/2],      x in X = [eta/2, 1 - eta/2]

A point ``T`` belongs to ``I(x)`` exactly when ``T - eta/2 <= x < T + eta/2``.
The two bounds ``T -/+ eta/2`` are computed once, in floating point, and
serve both as partition breaks and as membership thresholds, so the window
composition is constant on every partition segment bit-for-bit.
"""
from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .intervals import Interval, IntervalSet


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class TiesWarning(UserWarning):
    """Input contains repeated occurrence positions."""


def _readonly(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def check_eta(eta: float) -> float:
    eta = float(eta)
    if not 0.0 < eta < 1.0:
        raise DomainError(f"window length eta must lie in (0, 1), got {eta!r}")
    return eta


def center_domain(eta: float) -> Interval:
    """The closed set of admissible window centers ``[eta/2, 1 - eta/2]``."""
    h = check_eta(eta) / 2
    return Interval(h, 1.0 - h, True, True)


def replicate_rng(seed, *key: int) -> np.random.Generator:
    """Generator for one Monte-Carlo replicate.

    The stream depends only on the master seed and the integer ``key``
    (stage, replicate index, ...), so replicates can be produced in any
    order or in parallel with identical results.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def resolve_seed(seed) -> int:
    """Turn ``None`` into fresh entropy; integers pass through."""
    if seed is None:
        return int(np.random.SeedSequence().entropy)
    return int(seed)


def worker_count() -> int:
    """Thread cap from ``SCANPP_THREADS`` (default 1)."""
    raw = os.environ.get("SCANPP_THREADS", "").strip()
    if not raw:
        return 1
    try:
        v = int(raw)
    except ValueError:
        raise DomainError(f"SCANPP_THREADS must be a positive integer, got {raw!r}") from None
    if v < 1:
        raise DomainError(f"SCANPP_THREADS must be a positive integer, got {raw!r}")
    return v


def parallel_map(fn, items, workers: int | None = None) -> list:
    """Ordered map over independent jobs, threaded when more than one worker is allowed.

    Results do not depend on the number of workers.
    """
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


@dataclass(frozen=True, eq=False)
class PointSample:
    """Sorted occurrence positions on [0, 1].

    Input is sorted on construction. Repeated positions are accepted but
    emit a :class:`TiesWarning`.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.sort(np.asarray(self.points, dtype=float).ravel())
        if pts.size:
            if not np.all(np.isfinite(pts)):
                raise DomainError("positions must be finite")
            if pts[0] < 0.0 or pts[-1] > 1.0:
                raise DomainError("positions must lie in [0, 1]")
        if pts.size > 1 and np.any(pts[1:] == pts[:-1]):
            warnings.warn("sample contains tied positions", TiesWarning, stacklevel=3)
        object.__setattr__(self, "points", _readonly(pts))

    def __len__(self):
        return int(self.points.size)

    def __eq__(self, other):
        if not isinstance(other, PointSample):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    def __repr__(self):
        return f"PointSample(n={len(self)})"

    @property
    def has_ties(self) -> bool:
        p = self.points
        return bool(p.size > 1 and np.any(p[1:] == p[:-1]))


@dataclass(frozen=True, eq=False)
class MarkedSample:
    """Joint process ``N = N_A U N_B`` with marks +1 (from A) and -1 (from B)."""

    joint: PointSample
    marks: np.ndarray

    def __post_init__(self):
        marks = np.asarray(self.marks).ravel()
        if marks.size != len(self.joint):
            raise DomainError("marks must have exactly one entry per joint point")
        if marks.size and not np.all(np.isin(marks, (-1, 1))):
            raise DomainError("marks must be +1 or -1")
        object.__setattr__(self, "marks", _readonly(marks, dtype=np.int8))

    def __len__(self):
        return len(self.joint)

    def __eq__(self, other):
        if not isinstance(other, MarkedSample):
            return NotImplemented
        return self.joint == other.joint and np.array_equal(self.marks, other.marks)

    def __repr__(self):
        return f"MarkedSample(n_a={self.n_a}, n_b={self.n_b})"

    @property
    def n_a(self) -> int:
        return int(np.count_nonzero(self.marks == 1))

    @property
    def n_b(self) -> int:
        return int(np.count_nonzero(self.marks == -1))

    def split(self) -> tuple[PointSample, PointSample]:
        """Recover ``(N_A, N_B)`` from the marks."""
        pts = self.joint.points
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TiesWarning)
            return PointSample(pts[self.marks == 1]), PointSample(pts[self.marks == -1])


def merge_samples(a: PointSample, b: PointSample) -> MarkedSample:
    """Encode two samples as a joint process with Rademacher marks.

    Points of ``a`` get mark +1, points of ``b`` mark -1. On tied positions
    the point from ``a`` comes first.
    """
    pts = np.concatenate([a.points, b.points])
    marks = np.concatenate([np.ones(len(a), dtype=np.int8), -np.ones(len(b), dtype=np.int8)])
    order = np.argsort(pts, kind="stable")
    return MarkedSample(PointSample(pts[order]), marks[order])


def window_composition(n: PointSample, x: float, eta: float) -> PointSample:
    """Points of ``n`` inside the window ``(x - eta/2, x + eta/2]``."""
    dom = center_domain(eta)
    if not dom.contains(x):
        raise DomainError(f"center {x!r} outside [{dom.left!r}, {dom.right!r}]")
    h = eta / 2
    pts = n.points
    inside = (pts - h <= x) & (x < pts + h)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TiesWarning)
        return PointSample(pts[inside])


@dataclass(frozen=True, eq=False)
class Partition:
    """Breaks ``tau_0 < ... < tau_M`` of the center domain.

    Segment ``m`` (0-based) is ``[breaks[m], breaks[m+1])``; the last segment
    also contains the right end ``1 - eta/2``. The window at that single
    center can differ from the rest of the last segment when a point sits at
    1 or ``1 - eta`` exactly; such a null set of centers is ignored.
    """

    breaks: np.ndarray
    eta: float

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        if b.ndim != 1 or b.size < 2 or np.any(np.diff(b) <= 0):
            raise DomainError("partition breaks must be strictly increasing with at least two entries")
        object.__setattr__(self, "breaks", _readonly(b))
        object.__setattr__(self, "eta", check_eta(self.eta))

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self.eta == other.eta and np.array_equal(self.breaks, other.breaks)

    def __len__(self):
        return self.n_segments

    def __repr__(self):
        return f"Partition(eta={self.eta!r}, n_segments={self.n_segments})"

    @property
    def n_segments(self) -> int:
        return self.breaks.size - 1

    @property
    def left(self) -> np.ndarray:
        return self.breaks[:-1]

    @property
    def right(self) -> np.ndarray:
        return self.breaks[1:]

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breaks)

    @property
    def domain(self) -> Interval:
        return Interval(float(self.breaks[0]), float(self.breaks[-1]), True, True)

    def locate(self, x):
        """Index of the segment containing each center in ``x``."""
        x = np.asarray(x, dtype=float)
        if np.any((x < self.breaks[0]) | (x > self.breaks[-1])):
            raise DomainError("center outside the partition domain")
        idx = np.searchsorted(self.breaks, x, side="right") - 1
        return np.minimum(idx, self.n_segments - 1)

    def segment_interval(self, m: int) -> Interval:
        last = m == self.n_segments - 1
        return Interval(float(self.breaks[m]), float(self.breaks[m + 1]), True, last)

    def mask_to_set(self, mask) -> IntervalSet:
        """Union of the segments selected by a boolean mask."""
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (self.n_segments,):
            raise DomainError("mask length must equal the number of segments")
        pieces = []
        m, M = 0, self.n_segments
        while m < M:
            if mask[m]:
                k = m
                while k + 1 < M and mask[k + 1]:
                    k += 1
                pieces.append(Interval(float(self.breaks[m]), float(self.breaks[k + 1]), True, k == M - 1))
                m = k + 1
            else:
                m += 1
        return IntervalSet(pieces)

    def overlap_mask(self, region: IntervalSet) -> np.ndarray:
        """Segments sharing a set of positive length with ``region``."""
        out = np.zeros(self.n_segments, dtype=bool)
        for iv in region:
            if iv.right <= iv.left:
                continue
            out |= (self.left < iv.right) & (self.right > iv.left)
        return out


@dataclass(frozen=True, eq=False)
class StepProcess:
    """Right-continuous piecewise-constant function of the window center."""

    partition: Partition
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.partition.n_segments,):
            raise DomainError(
                f"expected {self.partition.n_segments} segment values, got shape {v.shape}"
            )
        object.__setattr__(self, "values", _readonly(v, dtype=v.dtype))

    def __call__(self, x):
        v = self.values[self.partition.locate(x)]
        return v.item() if v.ndim == 0 else v

    def __eq__(self, other):
        if not isinstance(other, StepProcess):
            return NotImplemented
        return self.partition == other.partition and np.array_equal(self.values, other.values)

    def __len__(self):
        return self.partition.n_segments

    def __repr__(self):
        return f"StepProcess(n_segments={len(self)})"

    @property
    def breaks(self) -> np.ndarray:
        return self.partition.breaks

    def min(self, region: IntervalSet | None = None):
        """Infimum over all centers, or over centers in ``region``.

        Returns ``inf`` when ``region`` meets no segment with positive length.
        """
        if region is None:
            return self.values.min()
        mask = self.partition.overlap_mask(region)
        return self.values[mask].min() if mask.any() else np.inf

    def with_values(self, values) -> "StepProcess":
        return StepProcess(self.partition, values)


def build_partition(n: PointSample, eta: float) -> Partition:
    """Breaks where some point enters or leaves the scanning window.

    ``{eta/2, 1 - eta/2}`` together with every ``T -/+ eta/2`` falling
    strictly inside the center domain; duplicates removed.
    """
    h = check_eta(eta) / 2
    lo, hi = h, 1.0 - h
    cand = np.concatenate([n.points - h, n.points + h])
    cand = cand[(cand > lo) & (cand < hi)]
    return Partition(np.unique(np.concatenate([[lo], cand, [hi]])), eta)


def window_ranges(n: PointSample, partition: Partition) -> tuple[np.ndarray, np.ndarray]:
    """Index ranges ``[start, end)`` of the sorted points in each segment's window."""
    h = partition.eta / 2
    x = partition.left
    start = np.searchsorted(n.points + h, x, side="right")
    end = np.searchsorted(n.points - h, x, side="right")
    return start, end

"""
Single-window test statistics as step processes of the window center.

Count statistics are read off the window index ranges. Kernel statistics
are computed by an event-driven sweep over the partition: when a point
enters or leaves the window only its kernel interactions with the current
window members are added or removed, so one full process costs
``O(sum of window occupancies)`` instead of ``O(w^2)`` per segment.

The sweep is vectorized over a matrix of mark replicates sharing the same
joint process, which is what the two-sample Monte-Carlo schemes need.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import (
    DomainError,
    MarkedSample,
    Partition,
    PointSample,
    StepProcess,
    build_partition,
    check_eta,
    parallel_map,
    window_ranges,
)

# replicate columns per sweep; fixed so that results do not depend on threading
SWEEP_CHUNK = 512

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class StatisticKind(Enum):
    """Available window statistics.

    Each member carries ``(label, needs_marks, one_sided, kernel_based)``.
    """

    COUNT_HOMOGENEITY = ("count-homogeneity", False, True, False)
    COUNT_TWO_SAMPLE = ("count-two-sample", True, True, False)
    KERNEL_TWO_SAMPLE = ("kernel-two-sample", True, False, True)
    KERNEL_TWO_SAMPLE_ONE_SIDED = ("kernel-two-sample-one-sided", True, True, True)
    KERNEL_HOMOGENEITY_TWO_SIDED = ("kernel-homogeneity-two-sided", False, False, True)
    KERNEL_HOMOGENEITY_ONE_SIDED = ("kernel-homogeneity-one-sided", False, True, True)

    def __init__(self, label, needs_marks, one_sided, kernel_based):
        self.label = label
        self.needs_marks = needs_marks
        self.one_sided = one_sided
        self.kernel_based = kernel_based

    @classmethod
    def from_label(cls, label: str) -> "StatisticKind":
        for kind in cls:
            if kind.label == label:
                return kind
        raise ValueError(f"unknown statistic {label!r}")


@dataclass(frozen=True)
class Kernel:
    """Gaussian density kernel ``exp(-u^2 / (2 h^2)) / (h sqrt(2 pi))``."""

    bandwidth: float

    def __post_init__(self):
        if not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise DomainError(f"bandwidth must be positive, got {self.bandwidth!r}")

    def __call__(self, u):
        h = self.bandwidth
        u = np.asarray(u, dtype=float)
        return np.exp(-0.5 * (u / h) ** 2) / (h * _SQRT_2PI)

    @property
    def peak(self) -> float:
        return 1.0 / (self.bandwidth * _SQRT_2PI)


def default_kernel(eta: float, kernel: Kernel | None = None) -> Kernel:
    return kernel if kernel is not None else Kernel(check_eta(eta))


# ---------------------------------------------------------------------------
# count statistics
# ---------------------------------------------------------------------------

def count_stat_homogeneity(n: PointSample, eta: float) -> StepProcess:
    """Number of points in each window, ``N(I(x))``."""
    part = build_partition(n, eta)
    start, end = window_ranges(n, part)
    return StepProcess(part, (end - start).astype(np.int64))


def count_stat_two_sample(m: MarkedSample, eta: float) -> StepProcess:
    """Number of +1-marked points in each window, ``N_A(I(x))``."""
    part = build_partition(m.joint, eta)
    start, end = window_ranges(m.joint, part)
    csum = np.concatenate([[0], np.cumsum(m.marks == 1)])
    return StepProcess(part, (csum[end] - csum[start]).astype(np.int64))


def scan_statistic(points, eta: float) -> int:
    """Supremum over centers of the window count (the classical scan statistic).

    ``points`` must be sorted. The supremum is attained either at the first
    window ``(0, eta]`` or when some point ``T >= eta`` has just entered, in
    which case the window holds the points of ``(T - eta, T]``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return 0
    h = eta / 2
    first = int(np.searchsorted(pts - h, h, side="right") - np.searchsorted(pts + h, h, side="right"))
    # entering breaks T - h inside the center domain; membership uses the
    # same floating bounds as the partition
    x = pts - h
    ok = (x > h) & (x < 1.0 - h)
    if not ok.any():
        return first
    xs = x[ok]
    inner = np.searchsorted(pts - h, xs, side="right") - np.searchsorted(pts + h, xs, side="right")
    return int(max(first, inner.max()))


# ---------------------------------------------------------------------------
# kernel statistics
# ---------------------------------------------------------------------------

def _sweep(points, marks, start, end, kernel, reduce):
    """Event-driven kernel field over the partition.

    For every window member ``j`` keeps ``field[j] = sum_{i in W, i != j}
    K(T_i - T_j) * marks[i]`` (one column per replicate) and evaluates
    ``reduce(field[W], marks[W])`` on each segment. Field updates use
    compensated summation.
    """
    n, R = marks.shape
    M = start.size
    out = np.empty((M, R))
    field = np.zeros((n, R))
    comp = np.zeros((n, R))
    s = e = 0

    def add(lo, hi, delta):
        # Kahan step on field[lo:hi]; delta is a scratch array
        f, c = field[lo:hi], comp[lo:hi]
        delta -= c
        t = f + delta
        np.subtract(t, f, out=c)
        c -= delta
        f[...] = t

    for m in range(M):
        s_new, e_new = int(start[m]), int(end[m])
        while s < s_new and s < e:
            i = s
            s += 1
            if e > s:
                k = kernel(points[s:e] - points[i])
                add(s, e, np.multiply(k[:, None], -marks[i]))
        if s < s_new:
            s = e = s_new
        while e < e_new:
            i = e
            if e > s:
                k = kernel(points[s:e] - points[i])
                add(s, e, np.multiply(k[:, None], marks[i]))
                field[i] = k @ marks[s:e]
            else:
                field[i] = 0.0
            comp[i] = 0.0
            e += 1
        out[m] = reduce(field[s:e], marks[s:e])
    return out


def _reducer(kind: StatisticKind, n_total: int, eta: float):
    if kind is StatisticKind.KERNEL_TWO_SAMPLE:
        return lambda f, e: np.einsum("ij,ij->j", f, e)
    if kind is StatisticKind.KERNEL_TWO_SAMPLE_ONE_SIDED:
        if n_total < 2:
            return lambda f, e: np.zeros(f.shape[1])
        a, b = 1.0 / (n_total - 1), 1.0 / n_total
        return lambda f, e: np.maximum(f * a, 0.0).sum(axis=0) * b
    if kind is StatisticKind.KERNEL_HOMOGENEITY_TWO_SIDED:
        if n_total < 2:
            return lambda f, e: np.full(f.shape[1], eta)
        c = 1.0 / (n_total * (n_total - 1))
        return lambda f, e: np.abs(f.sum(axis=0) * c - eta)
    if kind is StatisticKind.KERNEL_HOMOGENEITY_ONE_SIDED:
        if n_total < 2:
            return lambda f, e: np.zeros(f.shape[1])
        a, b = 1.0 / (n_total - 1), 1.0 / n_total
        return lambda f, e: np.maximum(f * a, 1.0).sum(axis=0) * b
    raise ValueError(f"{kind} is not a kernel statistic")


def kernel_sweep(kind: StatisticKind, joint: PointSample, eta: float, kernel: Kernel,
                 marks=None, partition: Partition | None = None) -> np.ndarray:
    """Kernel statistic values for many mark replicates at once.

    Parameters
    ----------
    marks : array (R, n) of +/-1, optional
        One row per replicate. Homogeneity statistics ignore marks.

    Returns
    -------
    array (R, M)
        Statistic value of replicate ``r`` on segment ``m``.
    """
    if partition is None:
        partition = build_partition(joint, eta)
    start, end = window_ranges(joint, partition)
    n = len(joint)
    if kind.needs_marks:
        marks = np.atleast_2d(np.asarray(marks, dtype=float))
        if marks.shape[1] != n:
            raise DomainError("each mark replicate needs one entry per joint point")
    else:
        marks = np.ones((1, n))
    reduce = _reducer(kind, n, eta)
    chunks = [marks[i:i + SWEEP_CHUNK] for i in range(0, marks.shape[0], SWEEP_CHUNK)]
    parts = parallel_map(
        lambda c: _sweep(joint.points, np.ascontiguousarray(c.T), start, end, kernel, reduce), chunks)
    return np.hstack(parts).T


def kernel_stat_two_sample(m: MarkedSample, eta: float, k: Kernel | None = None) -> StepProcess:
    """Sum over ordered pairs of distinct window points of ``K(T - T') e_T e_T'``."""
    k = default_kernel(eta, k)
    part = build_partition(m.joint, eta)
    vals = kernel_sweep(StatisticKind.KERNEL_TWO_SAMPLE, m.joint, eta, k, m.marks, part)[0]
    return StepProcess(part, vals)


def kernel_stat_two_sample_one_sided(m: MarkedSample, eta: float, k: Kernel | None = None) -> StepProcess:
    """Positive part of the local mark field, averaged over window points.

    ``(1/n) sum_T max((1/(n-1)) sum_{T' != T} K(T - T') e_T', 0)`` with
    ``n`` the total joint count. Identically 0 when ``n < 2``.
    """
    k = default_kernel(eta, k)
    part = build_partition(m.joint, eta)
    vals = kernel_sweep(StatisticKind.KERNEL_TWO_SAMPLE_ONE_SIDED, m.joint, eta, k, m.marks, part)[0]
    return StepProcess(part, vals)


def kernel_stat_homog_two_sided(n: PointSample, eta: float, k: Kernel | None = None) -> StepProcess:
    """``| (1/(n(n-1))) sum_{T != T' in window} K(T - T') - eta |``, ``n`` the total count."""
    k = default_kernel(eta, k)
    part = build_partition(n, eta)
    vals = kernel_sweep(StatisticKind.KERNEL_HOMOGENEITY_TWO_SIDED, n, eta, k, None, part)[0]
    return StepProcess(part, vals)


def kernel_stat_homog_one_sided(n: PointSample, eta: float, k: Kernel | None = None) -> StepProcess:
    """``(1/n) sum_T max(f_h(T), 1)`` with the leave-one-out window density estimate ``f_h``."""
    k = default_kernel(eta, k)
    part = build_partition(n, eta)
    vals = kernel_sweep(StatisticKind.KERNEL_HOMOGENEITY_ONE_SIDED, n, eta, k, None, part)[0]
    return StepProcess(part, vals)


def statistic_process(kind: StatisticKind, sample, eta: float, k: Kernel | None = None) -> StepProcess:
    """Dispatch on ``kind``; ``sample`` is a MarkedSample when marks are needed."""
    if kind.needs_marks and not isinstance(sample, MarkedSample):
        raise DomainError(f"{kind.label} needs a MarkedSample")
    if not kind.needs_marks and isinstance(sample, MarkedSample):
        raise DomainError(f"{kind.label} takes an unmarked PointSample")
    fn = {
        StatisticKind.COUNT_HOMOGENEITY: lambda: count_stat_homogeneity(sample, eta),
        StatisticKind.COUNT_TWO_SAMPLE: lambda: count_stat_two_sample(sample, eta),
        StatisticKind.KERNEL_TWO_SAMPLE: lambda: kernel_stat_two_sample(sample, eta, k),
        StatisticKind.KERNEL_TWO_SAMPLE_ONE_SIDED: lambda: kernel_stat_two_sample_one_sided(sample, eta, k),
        StatisticKind.KERNEL_HOMOGENEITY_TWO_SIDED: lambda: kernel_stat_homog_two_sided(sample, eta, k),
        StatisticKind.KERNEL_HOMOGENEITY_ONE_SIDED: lambda: kernel_stat_homog_one_sided(sample, eta, k),
    }[kind]
    return fn()


def window_statistic(kind: StatisticKind, points, eta: float, k: Kernel | None = None,
                     n_total: int | None = None, marks=None) -> float:
    """Statistic of a single window from its composition, by direct pair sums.

    ``points`` are the window's points; ``n_total`` is the global count
    entering the kernel normalizers (defaults to the window size).
    """
    pts = np.asarray(points, dtype=float)
    w = pts.size
    n = w if n_total is None else int(n_total)
    if kind is StatisticKind.COUNT_HOMOGENEITY:
        return float(w)
    e = None if marks is None else np.asarray(marks, dtype=float)
    if kind is StatisticKind.COUNT_TWO_SAMPLE:
        return float(np.count_nonzero(e == 1))
    k = default_kernel(eta, k)
    K = k(pts[:, None] - pts[None, :])
    np.fill_diagonal(K, 0.0)
    if kind is StatisticKind.KERNEL_TWO_SAMPLE:
        return float(e @ K @ e)
    if kind is StatisticKind.KERNEL_TWO_SAMPLE_ONE_SIDED:
        if n < 2:
            return 0.0
        return float(np.maximum(K @ e / (n - 1), 0.0).sum() / n)
    if kind is StatisticKind.KERNEL_HOMOGENEITY_TWO_SIDED:
        if n < 2:
            return float(eta)
        return float(abs(K.sum() / (n * (n - 1)) - eta))
    if kind is StatisticKind.KERNEL_HOMOGENEITY_ONE_SIDED:
        if n < 2:
            return 0.0
        return float(np.maximum(K.sum(axis=1) / (n - 1), 1.0).sum() / n)
    raise ValueError(f"unsupported statistic {kind}")


def tie_unit(kind: StatisticKind, n_total: int, k: Kernel | None) -> float:
    """Natural resolution of a statistic, used to scale tie tolerances."""
    if not kind.kernel_based:
        return 0.0
    peak = k.peak
    if kind is StatisticKind.KERNEL_TWO_SAMPLE:
        return peak
    if kind is StatisticKind.KERNEL_HOMOGENEITY_ONE_SIDED:
        return 1.0 / max(n_total, 1)
    return peak / max(n_total * (n_total - 1), 1)

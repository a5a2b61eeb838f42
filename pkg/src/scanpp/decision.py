"""
From adjusted p-value processes to reported regions.

Decisions are taken in the space of window centers. A rejected center
``x`` only says that *somewhere* in ``I(x)`` the null fails; the report in
point space therefore keeps every point covered by at least one accepted
window in ``i0`` and reports the rest, ``i1 = [0, 1] \\ i0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DomainError, Partition, center_domain
from .intervals import Interval, IntervalSet

UNIT = Interval(0.0, 1.0, True, True)


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    return alpha


@dataclass(frozen=True, eq=False)
class RejectionSet:
    """Rejected window centers, a union of partition segments."""

    centers: IntervalSet
    eta: float
    source: str = ""
    alpha: float | None = None
    mask: np.ndarray | None = None
    partition: Partition | None = None

    @classmethod
    def from_mask(cls, partition: Partition, mask, source="", alpha=None) -> "RejectionSet":
        mask = np.asarray(mask, dtype=bool).copy()
        mask.setflags(write=False)
        return cls(partition.mask_to_set(mask), partition.eta, source, alpha, mask, partition)

    def __eq__(self, other):
        if not isinstance(other, RejectionSet):
            return NotImplemented
        return self.centers == other.centers and self.eta == other.eta

    def __len__(self):
        return len(self.centers)

    @property
    def measure(self) -> float:
        return self.centers.measure

    @property
    def empty(self) -> bool:
        return not self.centers

    def issubset(self, other: "RejectionSet") -> bool:
        if self.mask is not None and other.mask is not None and self.partition == other.partition:
            return bool(np.all(other.mask[self.mask]))
        return self.centers.intersection(other.centers) == self.centers

    def accepted(self) -> IntervalSet:
        return self.centers.complement(center_domain(self.eta))


@dataclass(frozen=True, eq=False)
class PointReport:
    """``i0``: points covered by an accepted window; ``i1``: the rest of [0, 1]."""

    i0: IntervalSet
    i1: IntervalSet

    def __eq__(self, other):
        if not isinstance(other, PointReport):
            return NotImplemented
        return self.i0 == other.i0 and self.i1 == other.i1


def reject_at_level(adj, alpha: float) -> RejectionSet:
    """Segments whose adjusted p-value is at most ``alpha``.

    ``adj`` is any object exposing a step ``process`` (or a StepProcess).
    """
    alpha = _check_alpha(alpha)
    proc = getattr(adj, "process", adj)
    source = getattr(adj, "method", "")
    return RejectionSet.from_mask(proc.partition, proc.values <= alpha, source, alpha)


def dilate(centers: IntervalSet, eta: float) -> IntervalSet:
    """Points covered by some window ``(x - eta/2, x + eta/2]`` with ``x`` in ``centers``."""
    h = eta / 2
    return IntervalSet(
        Interval(iv.left - h, iv.right + h, False, iv.right_closed) for iv in centers
    ).intersection(IntervalSet([UNIT]))


def centers_to_points(r: RejectionSet, eta: float | None = None) -> PointReport:
    """Point-space image of a rejection set."""
    eta = r.eta if eta is None else eta
    i0 = dilate(r.centers.complement(center_domain(eta)), eta)
    return PointReport(i0, i0.complement(UNIT))

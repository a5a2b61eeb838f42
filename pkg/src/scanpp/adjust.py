"""
Multiplicity adjustments of p-value processes in continuous time.

* ``wbh_adjust``: weighted Benjamini-Hochberg step-up, weights are segment
  lengths relative to the center domain. Computed in exact rational
  arithmetic on the floating inputs.
* min-p: ``q(x) = F(p(x))`` with ``F`` the null c.d.f. of the infimum of
  the p-value process, estimated by Monte-Carlo. Homogeneity uses a second,
  independent sample of full null processes; the two-sample test reuses
  the mark ensemble that produced the p-values (double Monte-Carlo).
* ``stepdown_minp``: iterates the min-p rule on the shrinking set of
  non-rejected centers.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import (
    DomainError,
    Partition,
    PointSample,
    StepProcess,
    parallel_map,
    replicate_rng,
    resolve_seed,
)
from .decision import RejectionSet, _check_alpha
from .intervals import IntervalSet
from .pvalue import (
    STREAM_FULL_NULL,
    MCEnsemble,
    PValueProcess,
    _as_process,
    binom_survival,
)

# minima within this relative distance of a p-value count as "<=" (conservative)
P_RTOL = 1e-12

# full-null replicates per job in the homogeneity second stage
NULL_BLOCK = 64


@dataclass(frozen=True, eq=False)
class AdjustedProcess:
    """Adjusted p-value process.

    ``method`` is one of ``"wbh"``, ``"minp-mc"`` (single-step min-p) or
    ``"minp-stepdown-mc"``. ``null`` keeps the Monte-Carlo null p-value
    processes of min-p adjustments so that a step-down pass can reuse them.
    """

    process: StepProcess
    method: str
    alpha: float | None = None
    B: int | None = None
    null: "SharedNull | ProcessNull | None" = None

    @property
    def partition(self) -> Partition:
        return self.process.partition

    @property
    def values(self) -> np.ndarray:
        return self.process.values

    def __call__(self, x):
        return self.process(x)


@dataclass(frozen=True, eq=False)
class WBHResult:
    v_alpha: float
    k_hat: int
    adjusted: AdjustedProcess
    rejected: RejectionSet
    weights: np.ndarray
    v_alpha_exact: Fraction = Fraction(0)


# ---------------------------------------------------------------------------
# weighted BH
# ---------------------------------------------------------------------------

def segment_weights(partition: Partition) -> list[Fraction]:
    """Exact weights ``(tau_m - tau_{m-1}) / |X|``; they sum to exactly 1."""
    b = [Fraction(float(t)) for t in partition.breaks]
    total = b[-1] - b[0]
    return [(b[m + 1] - b[m]) / total for m in range(len(b) - 1)]


def wbh_adjust(p, alpha: float) -> WBHResult:
    """Weighted step-up over the segments of a p-value process.

    With ``sigma`` ordering the segment p-values increasingly and ``W_k`` the
    cumulative weight of the ``k`` smallest, ``k_hat`` is the largest ``k``
    with ``p_sigma(k) <= alpha * W_k`` and the threshold is
    ``V = alpha * W_k_hat``. Adjusted values are
    ``q(x) = min_{k : p_sigma(k) >= p(x)} p_sigma(k) / W_k`` capped at 1,
    so that ``{q <= alpha} = {p <= V}``.
    """
    alpha = _check_alpha(alpha)
    proc = _as_process(p)
    part = proc.partition
    vals = np.asarray(proc.values, dtype=float)
    M = vals.size
    weights = segment_weights(part)
    order = np.argsort(vals, kind="stable")
    a = Fraction(alpha)

    cum = Fraction(0)
    cumw = []
    k_hat = 0
    exact_p = [Fraction(float(vals[i])) for i in order]
    for k in range(M):
        cum += weights[order[k]]
        cumw.append(cum)
        if exact_p[k] <= a * cum:
            k_hat = k + 1
    V = a * cumw[k_hat - 1] if k_hat else Fraction(0)
    rejected = np.array([Fraction(float(v)) <= V for v in vals], dtype=bool)

    ratio = np.array([float(exact_p[k] / cumw[k]) for k in range(M)])
    q_sorted = np.minimum.accumulate(ratio[::-1])[::-1]
    # tied p-values share the value of the first member of their group
    srt = vals[order]
    first = np.searchsorted(srt, srt, side="left")
    q_sorted = np.minimum(q_sorted[first], 1.0)
    q = np.empty(M)
    q[order] = q_sorted

    adj = AdjustedProcess(StepProcess(part, q), "wbh", alpha)
    rej = RejectionSet.from_mask(part, rejected, "wbh", alpha)
    return WBHResult(float(V), k_hat, adj, rej, np.array([float(w) for w in weights]), V)


# ---------------------------------------------------------------------------
# min-p
# ---------------------------------------------------------------------------

class SharedNull:
    """Null p-value processes ``(B, M)`` living on the observed partition."""

    def __init__(self, partition: Partition, values):
        self.partition = partition
        self.values = np.asarray(values, dtype=float)

    @property
    def B(self) -> int:
        return self.values.shape[0]

    def minima(self, region: IntervalSet | None = None) -> np.ndarray:
        if region is None:
            return self.values.min(axis=1)
        mask = self.partition.overlap_mask(region)
        if not mask.any():
            return np.full(self.B, np.inf)
        return self.values[:, mask].min(axis=1)


class ProcessNull:
    """Null p-value processes on their own partitions.

    When only the global infima are needed, ``processes`` may be omitted and
    ``global_minima`` given directly.
    """

    def __init__(self, processes=None, global_minima=None):
        self.processes = None if processes is None else list(processes)
        if global_minima is None:
            global_minima = [p.values.min() for p in self.processes]
        self.global_minima = np.asarray(global_minima, dtype=float)

    @property
    def B(self) -> int:
        return self.global_minima.size

    def minima(self, region: IntervalSet | None = None) -> np.ndarray:
        if region is None:
            return self.global_minima
        if self.processes is None:
            raise ValueError("restricted minima need the stored null processes")
        return np.array([p.min(region) for p in self.processes], dtype=float)


def minp_from_minima(pvalues, minima, B: int | None = None) -> np.ndarray:
    """``(1 + #{b : m^b <= p}) / (B + 1)`` for each p-value."""
    m = np.sort(np.asarray(minima, dtype=float))
    B = m.size if B is None else B
    p = np.asarray(pvalues, dtype=float)
    cnt = np.searchsorted(m, p * (1.0 + P_RTOL), side="right")
    return (1.0 + cnt) / (B + 1.0)


def minp_adjust(p, null, method: str = "minp-mc") -> AdjustedProcess:
    """Single-step min-p adjustment against a stored null."""
    proc = _as_process(p)
    q = minp_from_minima(proc.values, null.minima(), null.B)
    return AdjustedProcess(proc.with_values(q), method, B=null.B, null=null)


def simulate_full_null(law, b: int, seed: int) -> PointSample:
    """One full-null process on [0, 1]: ``n_total`` uniform points, or
    a Poisson(``lam``) number of them when the law is unconditional."""
    rng = replicate_rng(seed, STREAM_FULL_NULL, b)
    n = rng.poisson(law.lam) if law.lam is not None else law.n_total
    return PointSample(np.sort(rng.random(n)))


def minp_adjust_mc_homogeneity(p, law, B2: int = 999, seed2=None, keep_processes: bool = False) -> AdjustedProcess:
    """Min-p adjustment for homogeneity with an independent Monte-Carlo stage.

    Parameters
    ----------
    p : PValueProcess
        Built from the same statistic as ``law``.
    law : ExactCountLaw or MonteCarloLaw
        Maps a point sample to its p-value process (and infimum).
    B2 : int
        Number of full-null processes simulated given ``N([0,1]) = n``.
    keep_processes : bool
        Store the null p-value processes (needed by :func:`stepdown_minp`).
    """
    if B2 < 1:
        raise DomainError("B2 must be at least 1")
    seed2 = resolve_seed(seed2)
    blocks = [range(lo, min(lo + NULL_BLOCK, B2)) for lo in range(0, B2, NULL_BLOCK)]
    if keep_processes:
        procs = parallel_map(lambda blk: [law.pvalues(simulate_full_null(law, b, seed2)) for b in blk], blocks)
        null = ProcessNull([q for blk in procs for q in blk])
    else:
        mins = parallel_map(lambda blk: law.minima([simulate_full_null(law, b, seed2) for b in blk]), blocks)
        null = ProcessNull(global_minima=np.concatenate(mins))
    return minp_adjust(p, null)


def minp_adjust_double_mc_two_sample(ens: MCEnsemble) -> AdjustedProcess:
    """Double Monte-Carlo min-p adjustment from one mark ensemble.

    Every replicate ``b = 0..B`` gets its own p-value process
    ``p^b(x) = #{b' : S^b'(x) >= S^b(x)} / (B + 1)`` and infimum ``m^b``;
    then ``q(x) = (1 + #{b >= 1 : m^b <= p^0(x)}) / (B + 1)``. No new draws.
    """
    counts = ens.exceedance_counts()
    B = ens.B
    cmin = np.sort(counts[1:].min(axis=1))
    q = (1.0 + np.searchsorted(cmin, counts[0], side="right")) / (B + 1.0)
    null = SharedNull(ens.partition, counts[1:] / (B + 1.0))
    return AdjustedProcess(StepProcess(ens.partition, q), "minp-mc", B=B, null=null)


def minp_adjust_two_sample_exact(p, ens: MCEnsemble) -> AdjustedProcess:
    """Min-p for exact two-sample count p-values; the ensemble only serves
    to estimate the law of the infimum."""
    if ens.window_counts is None:
        raise ValueError("ensemble lacks window counts")
    rep = ens.stats[1:].astype(np.int64)
    pb = np.asarray(binom_survival(np.broadcast_to(ens.window_counts, rep.shape), rep, ens.null_prob), dtype=float)
    null = SharedNull(ens.partition, pb)
    return minp_adjust(p, null)


def stepdown_minp(p, null, alpha: float) -> RejectionSet:
    """Step-down refinement of the single-step min-p rejection set.

    Starting from ``R^0 = {}``, ``R^j`` collects the centers whose p-value
    is significant against the null infimum restricted to the centers not
    in ``R^{j-1}``. The sequence is non-decreasing; its fixed point is
    returned. ``R^1`` equals the single-step set.
    """
    alpha = _check_alpha(alpha)
    proc = _as_process(p)
    part = proc.partition
    rejected = np.zeros(part.n_segments, dtype=bool)
    while True:
        region = part.mask_to_set(~rejected)
        q = minp_from_minima(proc.values, null.minima(region), null.B)
        new = q <= alpha
        if np.array_equal(new, rejected):
            break
        rejected = new
    return RejectionSet.from_mask(part, rejected, "minp-stepdown-mc", alpha)

"""
p-value processes: exact conditional tails and Monte-Carlo estimates.

Exact p-values exist for the count statistics. Kernel statistics are
calibrated by Monte-Carlo: for homogeneity, one window ``(0, eta]`` is
simulated ``B`` times given the total count (the null law is the same for
every center); for the two-sample test, the marks are resampled ``B``
times on the fixed joint process and the whole ensemble is kept for the
double Monte-Carlo min-p adjustment.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .core import (
    DomainError,
    MarkedSample,
    Partition,
    PointSample,
    StepProcess,
    build_partition,
    check_eta,
    replicate_rng,
    resolve_seed,
    window_ranges,
)
from .stats import (
    Kernel,
    StatisticKind,
    count_stat_homogeneity,
    count_stat_two_sample,
    default_kernel,
    kernel_sweep,
    scan_statistic,
    statistic_process,
    tie_unit,
    window_statistic,
)

# relative tolerance under which two floating statistic values count as tied
TIE_RTOL = 1e-9

# Monte-Carlo stream identifiers (first element of the replicate key)
STREAM_WINDOW_NULL = 1
STREAM_MARKS = 2
STREAM_FULL_NULL = 3

# segment columns per block when ranking large ensembles
COUNT_CHUNK = 256


def _check_count(v, name):
    a = np.asarray(v)
    if np.any(a < 0):
        raise DomainError(f"{name} must be non-negative")
    if not np.all(np.equal(np.floor(a), a)):
        raise DomainError(f"{name} must be integer valued")
    return a


def binom_survival(n, z, prob: float = 0.5):
    """``P(Bin(n, prob) >= z)``.

    Vectorized over ``n`` and ``z``. ``z <= 0`` gives 1 and ``z > n`` gives 0.
    The tail is evaluated through the regularized incomplete beta function,
    which stays accurate for large ``n`` and tiny tails.
    """
    n = _check_count(n, "n")
    z = _check_count(z, "z")
    if not 0.0 <= prob <= 1.0:
        raise DomainError("prob must lie in [0, 1]")
    out = sps.binom.sf(z - 1, n, prob)
    out = np.where(z <= 0, 1.0, np.where(z > n, 0.0, out))
    return out.item() if out.ndim == 0 else out


def poisson_survival(mu: float, z):
    """``P(Pois(mu) >= z)``."""
    if not mu >= 0:
        raise DomainError("Poisson mean must be non-negative")
    z = _check_count(z, "z")
    out = np.where(z <= 0, 1.0, sps.poisson.sf(z - 1, mu) if mu > 0 else 0.0)
    return out.item() if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class PValueProcess:
    """A p-value process together with how it was obtained.

    ``kind`` is ``"exact"`` or ``"monte-carlo"``; Monte-Carlo processes
    record ``B`` and the master ``seed``.
    """

    process: StepProcess
    kind: str = "exact"
    B: int | None = None
    seed: int | None = None
    statistic: StepProcess | None = None

    @property
    def partition(self) -> Partition:
        return self.process.partition

    @property
    def values(self) -> np.ndarray:
        return self.process.values

    def __call__(self, x):
        return self.process(x)

    def __len__(self):
        return len(self.process)


def _as_process(p) -> StepProcess:
    return p.process if isinstance(p, PValueProcess) else p


# ---------------------------------------------------------------------------
# exact p-value processes
# ---------------------------------------------------------------------------

def pvalue_homog_conditional(n: PointSample, eta: float, null_prob: float | None = None) -> PValueProcess:
    """Exact conditional p-values of the window count given ``N([0,1])``.

    Given the total count ``n``, a window of length ``eta`` holds a
    ``Bin(n, eta)`` number of points under homogeneity; ``null_prob``
    overrides the success probability (default ``eta``).
    """
    eta = check_eta(eta)
    prob = eta if null_prob is None else float(null_prob)
    S = count_stat_homogeneity(n, eta)
    p = binom_survival(len(n), S.values, prob)
    return PValueProcess(S.with_values(np.asarray(p, dtype=float)), "exact", statistic=S)


def pvalue_homog_known_lambda(n: PointSample, eta: float, lam: float) -> PValueProcess:
    """Unconditional p-values ``P(Pois(eta * lam) >= N(I(x)))`` for a known mean count ``lam``."""
    eta = check_eta(eta)
    if not lam > 0:
        raise DomainError("lambda must be positive")
    S = count_stat_homogeneity(n, eta)
    p = poisson_survival(eta * lam, S.values)
    return PValueProcess(S.with_values(np.asarray(p, dtype=float)), "exact", statistic=S)


def _two_sample_count_p(total, n_a, null_prob):
    return np.asarray(binom_survival(total, n_a, null_prob), dtype=float)


def pvalue_two_sample_count(m: MarkedSample, eta: float, null_prob: float = 0.5) -> PValueProcess:
    """``P(Bin(N(I(x)), null_prob) >= N_A(I(x)))`` on every segment."""
    if not 0.0 < null_prob < 1.0:
        raise DomainError("null_prob must lie in (0, 1)")
    S = count_stat_two_sample(m, eta)
    start, end = window_ranges(m.joint, S.partition)
    p = _two_sample_count_p(end - start, S.values, null_prob)
    return PValueProcess(S.with_values(p), "exact", statistic=S)


# ---------------------------------------------------------------------------
# Monte-Carlo
# ---------------------------------------------------------------------------

def tie_tolerance(values, unit: float, axis=None):
    """Absolute tolerance for comparing statistic values."""
    scale = np.max(np.abs(values), axis=axis) if np.size(values) else 0.0
    return TIE_RTOL * (scale + unit)


def mc_pvalues(observed, null_sample, unit: float = 0.0) -> np.ndarray:
    """``(1 + #{b : S^b >= S^0}) / (B + 1)`` for each observed value.

    Ties (within :data:`TIE_RTOL`) count as exceedances.
    """
    obs = np.asarray(observed, dtype=float)
    null = np.sort(np.asarray(null_sample, dtype=float))
    B = null.size
    tol = TIE_RTOL * (np.maximum(np.abs(obs), np.abs(null).max() if B else 0.0) + unit)
    ge = B - np.searchsorted(null, obs - tol, side="left")
    return (1.0 + ge) / (B + 1.0)


def simulate_window_null(kind: StatisticKind, n_total: int, eta: float, k: Kernel | None,
                         B: int, seed: int) -> np.ndarray:
    """``B`` null draws of the statistic on the window ``(0, eta]`` given ``N([0,1]) = n_total``."""
    out = np.empty(B)
    for b in range(B):
        rng = replicate_rng(seed, STREAM_WINDOW_NULL, b)
        w = rng.binomial(n_total, eta)
        pts = np.sort(eta - rng.uniform(0.0, eta, size=w))  # (0, eta]
        out[b] = window_statistic(kind, pts, eta, k, n_total=n_total)
    return out


def mc_pvalue_homogeneity(kind: StatisticKind, n: PointSample, eta: float, k: Kernel | None = None,
                          B: int = 999, seed=None):
    """Monte-Carlo p-value process for a homogeneity statistic.

    Returns
    -------
    pvalues : PValueProcess
    null_sample : ndarray (B,)
        The i.i.d. null draws ``S^1..S^B`` of the single-window statistic.
    """
    if kind.needs_marks:
        raise DomainError(f"{kind.label} is a two-sample statistic")
    if B < 1:
        raise DomainError("B must be at least 1")
    eta = check_eta(eta)
    seed = resolve_seed(seed)
    k = default_kernel(eta, k) if kind.kernel_based else k
    S0 = statistic_process(kind, n, eta, k)
    null = simulate_window_null(kind, len(n), eta, k, B, seed)
    p = mc_pvalues(S0.values, null, tie_unit(kind, len(n), k))
    return PValueProcess(S0.with_values(p), "monte-carlo", B, seed, statistic=S0), null


@dataclass(frozen=True, eq=False)
class MCEnsemble:
    """Observed and resampled statistic processes on one partition.

    Row 0 of ``stats`` is the observed statistic, rows ``1..B`` use
    resampled marks.
    """

    partition: Partition
    stats: np.ndarray
    B: int
    seed: int
    kind: StatisticKind
    unit: float = 0.0
    window_counts: np.ndarray | None = None
    null_prob: float = 0.5
    meta: dict = field(default_factory=dict)

    @property
    def observed(self) -> StepProcess:
        return StepProcess(self.partition, self.stats[0])

    def exceedance_counts(self) -> np.ndarray:
        """``#{b' : S^b'(x) >= S^b(x)}`` for every row ``b`` and segment.

        Values closer than the tie tolerance are grouped into one tie class
        before counting.
        """
        S = self.stats
        R, M = S.shape
        counts = np.empty(S.shape, dtype=np.int32)
        rows = np.arange(R)[:, None]
        for lo in range(0, M, COUNT_CHUNK):
            blk = S[:, lo:lo + COUNT_CHUNK]
            tol = tie_tolerance(blk, self.unit, axis=0)
            order = np.argsort(blk, axis=0, kind="stable")
            srt = np.take_along_axis(blk, order, axis=0)
            new_class = np.ones(srt.shape, dtype=bool)
            new_class[1:] = np.diff(srt, axis=0) > tol
            first = np.maximum.accumulate(np.where(new_class, rows, 0), axis=0)
            np.put_along_axis(counts[:, lo:lo + COUNT_CHUNK], order, R - first, axis=0)
        return counts

    def replicate_pvalues(self) -> np.ndarray:
        """Resampled p-value processes ``p^b(x)``, shape ``(B+1, M)``."""
        return self.exceedance_counts() / (self.B + 1.0)


def draw_marks(n: int, B: int, seed: int, null_prob: float = 0.5) -> np.ndarray:
    """``B`` i.i.d. mark vectors with ``P(+1) = null_prob``, shape ``(B, n)``."""
    out = np.empty((B, n), dtype=np.int8)
    for b in range(B):
        rng = replicate_rng(seed, STREAM_MARKS, b)
        out[b] = np.where(rng.random(n) < null_prob, 1, -1)
    return out


def ensemble_statistics(kind: StatisticKind, joint: PointSample, eta: float, k: Kernel | None,
                        marks, partition: Partition) -> np.ndarray:
    """Statistic values ``(R, M)`` for a matrix of mark rows on a fixed joint process."""
    marks = np.atleast_2d(marks)
    if kind is StatisticKind.COUNT_TWO_SAMPLE:
        start, end = window_ranges(joint, partition)
        csum = np.zeros((marks.shape[0], marks.shape[1] + 1), dtype=np.int64)
        np.cumsum(marks == 1, axis=1, out=csum[:, 1:])
        return (csum[:, end] - csum[:, start]).astype(float)
    if not kind.needs_marks:
        raise DomainError(f"{kind.label} is not a two-sample statistic")
    return kernel_sweep(kind, joint, eta, k, marks, partition)


def mc_pvalue_two_sample(kind: StatisticKind, m: MarkedSample, eta: float, k: Kernel | None = None,
                         B: int = 999, seed=None, null_prob: float = 0.5, replicate_marks=None):
    """Monte-Carlo p-value process for a two-sample statistic.

    The joint process, and hence the partition, stays fixed; only the marks
    are resampled, i.i.d. with ``P(+1) = null_prob``. ``replicate_marks``
    (shape ``(B, n)``) replaces the random draws, e.g. by an exhaustive
    enumeration.

    Returns
    -------
    pvalues : PValueProcess
    ensemble : MCEnsemble
    """
    if not kind.needs_marks:
        raise DomainError(f"{kind.label} is a homogeneity statistic")
    if not 0.0 < null_prob < 1.0:
        raise DomainError("null_prob must lie in (0, 1)")
    eta = check_eta(eta)
    seed = resolve_seed(seed)
    k = default_kernel(eta, k) if kind.kernel_based else k
    n = len(m)
    if replicate_marks is None:
        if B < 1:
            raise DomainError("B must be at least 1")
        rep = draw_marks(n, B, seed, null_prob)
    else:
        rep = np.asarray(replicate_marks, dtype=np.int8).reshape(-1, n)
        B = rep.shape[0]
    part = build_partition(m.joint, eta)
    all_marks = np.vstack([m.marks[None, :], rep])
    S = ensemble_statistics(kind, m.joint, eta, k, all_marks, part)
    start, end = window_ranges(m.joint, part)
    ens = MCEnsemble(part, S, B, seed, kind, tie_unit(kind, n, k), end - start, null_prob,
                     meta={"mark_ensembles_drawn": 1 if replicate_marks is None else 0})
    counts = ens.exceedance_counts()[0]
    p = counts / (B + 1.0)
    return PValueProcess(StepProcess(part, p), "monte-carlo", B, seed, statistic=ens.observed), ens


# ---------------------------------------------------------------------------
# per-window null laws for homogeneity (used by the min-p stage)
# ---------------------------------------------------------------------------

class ExactCountLaw:
    """Exact law of the window count under homogeneity.

    Conditional on ``n_total`` (binomial tail with success probability
    ``null_prob``, default ``eta``) or, when ``lam`` is given, unconditional
    Poisson with mean ``eta * lam``. The p-value is a non-increasing function
    of the count, so the infimum over centers is the tail at the scan
    statistic.
    """

    def __init__(self, n_total: int, eta: float, lam: float | None = None, null_prob: float | None = None):
        self.n_total = int(n_total)
        self.eta = check_eta(eta)
        self.lam = lam
        self.null_prob = self.eta if null_prob is None else float(null_prob)

    def tail(self, counts):
        if self.lam is not None:
            return poisson_survival(self.eta * self.lam, counts)
        return binom_survival(self.n_total, counts, self.null_prob)

    def pvalues(self, sample: PointSample) -> StepProcess:
        S = count_stat_homogeneity(sample, self.eta)
        return S.with_values(np.asarray(self.tail(S.values), dtype=float))

    def minimum(self, sample: PointSample) -> float:
        return float(self.tail(scan_statistic(sample.points, self.eta)))

    def minima(self, samples) -> np.ndarray:
        """Infima for many samples with a single tail evaluation."""
        sup = np.array([scan_statistic(s.points, self.eta) for s in samples], dtype=np.int64)
        return np.asarray(self.tail(sup), dtype=float).reshape(-1)


class MonteCarloLaw:
    """Empirical single-window null law from :func:`mc_pvalue_homogeneity`."""

    lam = None

    def __init__(self, kind: StatisticKind, n_total: int, eta: float, k: Kernel | None, null_sample):
        self.kind = kind
        self.n_total = int(n_total)
        self.eta = check_eta(eta)
        self.k = k
        self.null_sample = np.asarray(null_sample, dtype=float)

    def pvalues(self, sample: PointSample) -> StepProcess:
        # the observed total enters the normalizers, not the replicate's own count
        k = self.k
        part = build_partition(sample, self.eta)
        if self.kind is StatisticKind.COUNT_HOMOGENEITY:
            S = count_stat_homogeneity(sample, self.eta).values.astype(float)
        else:
            S = _homog_kernel_values(self.kind, sample, self.eta, k, self.n_total, part)
        p = mc_pvalues(S, self.null_sample, tie_unit(self.kind, self.n_total, k))
        return StepProcess(part, p)

    def minimum(self, sample: PointSample) -> float:
        return float(self.pvalues(sample).values.min())

    def minima(self, samples) -> np.ndarray:
        return np.array([self.minimum(s) for s in samples], dtype=float)


def _homog_kernel_values(kind, sample, eta, k, n_total, part):
    from .stats import _reducer, _sweep
    start, end = window_ranges(sample, part)
    cols = np.ones((len(sample), 1))
    return _sweep(sample.points, cols, start, end, k, _reducer(kind, n_total, eta))[:, 0]

"""
Simulation harness: signal design, Poisson sampling and error-rate estimation.

The signal ``theta`` is piecewise constant. Around each of 1/4, 1/2 and 3/4
it equals ``+theta*`` on a central piece of width ``r/2`` and ``-theta*`` on
the two flanking pieces of width ``r/4``, so that it integrates to zero.
Homogeneity trials draw a Poisson process of intensity ``nu* (1 + theta)``;
two-sample trials draw a homogeneous joint process of rate ``nu*`` and bias
the marks to ``P(+1) = (theta* + 1) / 2`` on the signal support.

Pieces are stored half-open ``[a, b)``. A window ``(x - eta/2, x + eta/2]``
meets ``[a, b)`` exactly when ``x`` lies in ``[a - eta/2, b + eta/2)``.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .adjust import (
    minp_adjust_double_mc_two_sample,
    minp_adjust_mc_homogeneity,
    minp_adjust_two_sample_exact,
    stepdown_minp,
    wbh_adjust,
)
from .core import DomainError, MarkedSample, PointSample, center_domain, check_eta, replicate_rng
from .decision import RejectionSet, reject_at_level
from .intervals import Interval, IntervalSet
from .pvalue import (
    ExactCountLaw,
    MonteCarloLaw,
    mc_pvalue_homogeneity,
    mc_pvalue_two_sample,
    pvalue_homog_conditional,
    pvalue_two_sample_count,
)
from .stats import Kernel, StatisticKind, default_kernel

STREAM_SIM = 10

CSV_COLUMNS = ["trial", "theta_star", "nu_star", "method", "statistic", "alpha",
               "fwer_indicator", "fdp", "sensitivity", "specificity"]

METHODS = ("minp", "stepdown", "wbh")


def _half_open(a, b):
    return Interval(a, b, True, False)


@dataclass(frozen=True)
class SignalSpec:
    """Piecewise-constant signal with values ``+theta*``, ``-theta*`` and 0."""

    theta_star: float
    r: float
    i1_plus: IntervalSet
    i1_minus: IntervalSet

    @property
    def i1(self) -> IntervalSet:
        if self.theta_star == 0:
            return IntervalSet()
        return self.i1_plus.union(self.i1_minus)

    @property
    def i0(self) -> IntervalSet:
        return self.i1.complement(Interval(0.0, 1.0, True, True))

    def theta(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for iv in self.i1_plus:
            out[(t >= iv.left) & (t < iv.right)] = self.theta_star
        for iv in self.i1_minus:
            out[(t >= iv.left) & (t < iv.right)] = -self.theta_star
        return out

    def pieces(self) -> list[tuple[float, float, float]]:
        """``(a, b, theta)`` for consecutive pieces covering [0, 1]."""
        marks = [(iv.left, iv.right, self.theta_star) for iv in self.i1_plus]
        marks += [(iv.left, iv.right, -self.theta_star) for iv in self.i1_minus]
        marks.sort()
        out, pos = [], 0.0
        for a, b, th in marks:
            if a > pos:
                out.append((pos, a, 0.0))
            out.append((a, b, th))
            pos = b
        if pos < 1.0:
            out.append((pos, 1.0, 0.0))
        return out


def build_signal(r: float, theta_star: float) -> SignalSpec:
    """The three-bump zero-mean signal of half-scale ``r``."""
    r = float(r)
    if not 0.0 < r < 0.25:
        raise DomainError("r must lie in (0, 1/4) for the signal pieces to be disjoint")
    if not theta_star >= 0:
        raise DomainError("theta_star must be non-negative")
    plus, minus = [], []
    for c in (0.25, 0.5, 0.75):
        plus.append(_half_open(c - r / 4, c + r / 4))
        minus.append(_half_open(c - r / 2, c - r / 4))
        minus.append(_half_open(c + r / 4, c + r / 2))
    return SignalSpec(float(theta_star), r, IntervalSet(plus), IntervalSet(minus))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_inhomogeneous_poisson(nu_star: float, sig: SignalSpec, seed=None) -> PointSample:
    """Poisson process of intensity ``nu* (1 + theta)`` by exact per-piece inversion."""
    if sig.theta_star > 1:
        raise DomainError("theta_star > 1 gives a negative intensity")
    if not nu_star >= 0:
        raise DomainError("nu_star must be non-negative")
    rng = _rng(seed)
    pts = []
    for a, b, th in sig.pieces():
        mu = nu_star * (1.0 + th) * (b - a)
        k = rng.poisson(mu) if mu > 0 else 0
        pts.append(a + (b - a) * rng.random(k))
    return PointSample(np.sort(np.concatenate(pts)))


def sample_two_sample_marks(nu_star: float, sig: SignalSpec, seed=None) -> MarkedSample:
    """Homogeneous joint process with marks biased to ``(theta*+1)/2`` on the signal support."""
    if not 0.0 <= sig.theta_star <= 1.0:
        raise DomainError("theta_star must lie in [0, 1] for the two-sample design")
    rng = _rng(seed)
    n = rng.poisson(nu_star)
    joint = PointSample(np.sort(rng.random(n)))
    prob = np.full(n, 0.5)
    prob[sig.i1.contains(joint.points)] = (sig.theta_star + 1.0) / 2.0
    marks = np.where(rng.random(n) < prob, 1, -1)
    return MarkedSample(joint, marks)


def true_null_centers(sig: SignalSpec, eta: float) -> IntervalSet:
    """Centers whose whole window avoids the signal support."""
    eta = check_eta(eta)
    h = eta / 2
    touched = IntervalSet(_half_open(iv.left - h, iv.right + h) for iv in sig.i1)
    return touched.complement(center_domain(eta))


# ---------------------------------------------------------------------------
# error rates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialResult:
    """Lebesgue measures comparing a rejection set with the true-null centers."""

    rejection: RejectionSet
    j0: IntervalSet

    @property
    def domain_measure(self) -> float:
        dom = center_domain(self.rejection.eta)
        return dom.right - dom.left

    @property
    def rejected_measure(self) -> float:
        return self.rejection.measure

    @property
    def false_measure(self) -> float:
        return self.j0.intersection(self.rejection.centers).measure

    @property
    def true_measure(self) -> float:
        return max(self.rejected_measure - self.false_measure, 0.0)

    @property
    def j0_measure(self) -> float:
        return self.j0.measure

    @property
    def fwer_indicator(self) -> bool:
        return self.false_measure > 0

    @property
    def fdp(self) -> float:
        r = self.rejected_measure
        return self.false_measure / r if r > 0 else 0.0

    @property
    def sensitivity(self) -> float:
        alt = self.domain_measure - self.j0_measure
        return min(self.true_measure / alt, 1.0) if alt > 0 else math.nan

    @property
    def specificity(self) -> float:
        j0 = self.j0_measure
        return (j0 - self.false_measure) / j0 if j0 > 0 else math.nan


class ErrorRates(NamedTuple):
    fwer: float
    fdr: float
    sensitivity: float
    specificity: float


def _nanmean(a):
    a = np.asarray(a, dtype=float)
    a = a[~np.isnan(a)]
    return float(a.mean()) if a.size else math.nan


def empirical_error_rates(trials) -> ErrorRates:
    """FWER, FDR (``0/0 = 0``), mean sensitivity and mean specificity.

    Trials with an empty alternative (or empty null) set are left out of the
    sensitivity (specificity) average.
    """
    trials = list(trials)
    if not trials:
        raise ValueError("at least one trial is required")
    return ErrorRates(
        float(np.mean([t.fwer_indicator for t in trials])),
        float(np.mean([t.fdp for t in trials])),
        _nanmean([t.sensitivity for t in trials]),
        _nanmean([t.specificity for t in trials]),
    )


def error_rate_standard_errors(trials) -> tuple[float, float]:
    """Monte-Carlo standard errors of the FWER and FDR estimates."""
    ind = np.array([t.fwer_indicator for t in trials], dtype=float)
    fdp = np.array([t.fdp for t in trials], dtype=float)
    R = ind.size
    ddof = 1 if R > 1 else 0
    return float(ind.std(ddof=ddof) / math.sqrt(R)), float(fdp.std(ddof=ddof) / math.sqrt(R))


# ---------------------------------------------------------------------------
# trials
# ---------------------------------------------------------------------------

def trial_seeds(seed: int, trial: int) -> tuple[np.random.Generator, int, int]:
    """Data generator and two Monte-Carlo master seeds for one trial."""
    rng = replicate_rng(seed, STREAM_SIM, trial)
    s1, s2 = (int(v) for v in rng.integers(0, 2**63 - 1, size=2))
    return rng, s1, s2


def _check_methods(methods):
    methods = tuple(methods)
    bad = set(methods) - set(METHODS)
    if bad:
        raise DomainError(f"unknown methods {sorted(bad)}")
    return methods


def homogeneity_decisions(n: PointSample, eta: float, alpha: float, methods=("minp", "wbh"),
                          kind: StatisticKind = StatisticKind.COUNT_HOMOGENEITY,
                          k: Kernel | None = None, B: int = 999, seed1=None, seed2=None) -> dict:
    """Rejection sets of the requested procedures on one homogeneity sample."""
    methods = _check_methods(methods)
    if kind is StatisticKind.COUNT_HOMOGENEITY:
        p = pvalue_homog_conditional(n, eta)
        law = ExactCountLaw(len(n), eta)
    else:
        k = default_kernel(eta, k)
        p, null = mc_pvalue_homogeneity(kind, n, eta, k, B, seed1)
        law = MonteCarloLaw(kind, len(n), eta, k, null)
    out = {}
    if "wbh" in methods:
        out["wbh"] = wbh_adjust(p, alpha).rejected
    if "minp" in methods or "stepdown" in methods:
        q = minp_adjust_mc_homogeneity(p, law, B, seed2, keep_processes="stepdown" in methods)
        if "minp" in methods:
            out["minp"] = reject_at_level(q, alpha)
        if "stepdown" in methods:
            out["stepdown"] = stepdown_minp(p, q.null, alpha)
    return out


def two_sample_decisions(m: MarkedSample, eta: float, alpha: float, methods=("minp", "wbh"),
                         kind: StatisticKind = StatisticKind.KERNEL_TWO_SAMPLE_ONE_SIDED,
                         k: Kernel | None = None, B: int = 999, seed1=None, null_prob: float = 0.5) -> dict:
    """Rejection sets of the requested procedures on one two-sample sample."""
    methods = _check_methods(methods)
    out = {}
    needs_minp = "minp" in methods or "stepdown" in methods
    if kind is StatisticKind.COUNT_TWO_SAMPLE:
        p = pvalue_two_sample_count(m, eta, null_prob)
        if needs_minp:
            _, ens = mc_pvalue_two_sample(kind, m, eta, None, B, seed1, null_prob)
            q = minp_adjust_two_sample_exact(p, ens)
    else:
        p, ens = mc_pvalue_two_sample(kind, m, eta, k, B, seed1, null_prob)
        if needs_minp:
            q = minp_adjust_double_mc_two_sample(ens)
    if "wbh" in methods:
        out["wbh"] = wbh_adjust(p, alpha).rejected
    if "minp" in methods:
        out["minp"] = reject_at_level(q, alpha)
    if "stepdown" in methods:
        out["stepdown"] = stepdown_minp(p, q.null, alpha)
    return out


def run_experiment(design: str, theta_stars, nu_star: float = 500.0, r: float = 0.05,
                   eta: float | None = None, alpha: float = 0.1, methods=("minp", "wbh"),
                   statistic: str | None = None, R: int = 100, B: int = 999, seed: int = 0,
                   bandwidth: float | None = None, progress=None) -> list[dict]:
    """Repeat trials of one design over a grid of signal amplitudes.

    Returns one row per (theta*, trial, method) with the CSV columns.
    """
    if design not in ("homogeneity", "two-sample"):
        raise DomainError(f"unknown design {design!r}")
    eta = 2 * r if eta is None else check_eta(eta)
    if statistic is None:
        statistic = "count-homogeneity" if design == "homogeneity" else "kernel-two-sample-one-sided"
    kind = StatisticKind.from_label(statistic)
    if kind.needs_marks != (design == "two-sample"):
        raise DomainError(f"statistic {statistic!r} does not fit the {design} design")
    k = Kernel(bandwidth) if bandwidth is not None else None
    rows = []
    for ti, th in enumerate(theta_stars):
        sig = build_signal(r, th)
        j0 = true_null_centers(sig, eta)
        for t in range(R):
            rng, s1, s2 = trial_seeds(seed, ti * 1_000_003 + t)
            if design == "homogeneity":
                n = sample_inhomogeneous_poisson(nu_star, sig, rng)
                dec = homogeneity_decisions(n, eta, alpha, methods, kind, k, B, s1, s2)
            else:
                m = sample_two_sample_marks(nu_star, sig, rng)
                dec = two_sample_decisions(m, eta, alpha, methods, kind, k, B, s1)
            for method in methods:
                res = TrialResult(dec[method], j0)
                rows.append(dict(trial=t, theta_star=th, nu_star=nu_star, method=method,
                                 statistic=statistic, alpha=alpha,
                                 fwer_indicator=int(res.fwer_indicator), fdp=res.fdp,
                                 sensitivity=res.sensitivity, specificity=res.specificity,
                                 _result=res))
            if progress is not None:
                progress(th, t)
    return rows


def summarize(rows) -> list[dict]:
    """Aggregate rows per (theta*, method, statistic)."""
    groups: dict = {}
    for row in rows:
        groups.setdefault((row["theta_star"], row["method"], row["statistic"]), []).append(row["_result"])
    out = []
    for (th, method, stat), trials in groups.items():
        rates = empirical_error_rates(trials)
        fwer_se, fdr_se = error_rate_standard_errors(trials)
        out.append(dict(theta_star=th, method=method, statistic=stat, R=len(trials),
                        fwer=rates.fwer, fwer_se=fwer_se, fdr=rates.fdr, fdr_se=fdr_se,
                        sensitivity=rates.sensitivity, specificity=rates.specificity))
    return out


def write_csv(rows, fh) -> None:
    w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in row.items() if k in CSV_COLUMNS})


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="scanpp-sim", description="Error-rate simulations for scan multiple testing.")
    ap.add_argument("--design", choices=["homogeneity", "two-sample"], default="homogeneity")
    ap.add_argument("--theta", type=float, nargs="+", default=[0.1, 0.5, 0.9])
    ap.add_argument("--nu", type=float, default=500.0)
    ap.add_argument("--r", type=float, default=0.05)
    ap.add_argument("--eta", type=float, default=None, help="window length (default 2r)")
    ap.add_argument("--alpha", type=float, default=0.1)
    ap.add_argument("--methods", nargs="+", choices=METHODS, default=["minp", "wbh"])
    ap.add_argument("--stat", default=None, help="statistic label")
    ap.add_argument("--R", type=int, default=100)
    ap.add_argument("--B", type=int, default=999)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--bandwidth", type=float, default=None)
    ap.add_argument("--out", default=None, help="per-trial CSV (default stdout)")
    args = ap.parse_args(argv)
    try:
        rows = run_experiment(args.design, args.theta, args.nu, args.r, args.eta, args.alpha,
                              args.methods, args.stat, args.R, args.B, args.seed, args.bandwidth)
    except (DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_csv(rows, fh)
    else:
        write_csv(rows, sys.stdout)
    for s in summarize(rows):
        print(f"theta*={s['theta_star']:g} {s['method']:>8} {s['statistic']}: "
              f"FWER={s['fwer']:.3f}±{s['fwer_se']:.3f} FDR={s['fdr']:.3f}±{s['fdr_se']:.3f} "
              f"sens={s['sensitivity']:.3f} spec={s['specificity']:.3f}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())

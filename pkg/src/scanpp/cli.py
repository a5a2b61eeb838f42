"""
Command-line pipeline: read occurrences, test, adjust, decide, write results.

Input is a CSV with one occurrence per row, ``position[,label]``. An
optional row ``#domain,<lo>,<hi>`` maps positions affinely onto [0, 1];
other rows starting with ``#`` are comments. In two-sample mode exactly two
labels are expected; the lexicographically smaller one gets mark +1.

Output directory::

    statistic.csv  pvalues.csv  adjusted.csv   segment_left,segment_right,value
    summary.json                               decisions and provenance

Exit codes: 0 success, 2 input error, 3 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from .adjust import (
    minp_adjust_double_mc_two_sample,
    minp_adjust_mc_homogeneity,
    minp_adjust_two_sample_exact,
    stepdown_minp,
    wbh_adjust,
)
from .core import (
    DomainError,
    MarkedSample,
    Partition,
    PointSample,
    StepProcess,
    TiesWarning,
    check_eta,
    resolve_seed,
    worker_count,
)
from .decision import PointReport, RejectionSet, centers_to_points, reject_at_level
from .intervals import Interval, IntervalSet
from .pvalue import (
    ExactCountLaw,
    MonteCarloLaw,
    mc_pvalue_homogeneity,
    mc_pvalue_two_sample,
    pvalue_homog_conditional,
    pvalue_homog_known_lambda,
    pvalue_two_sample_count,
)
from .stats import Kernel, StatisticKind

EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 2, 3

MODES = ("homogeneity", "two-sample")
ADJUSTMENTS = ("minp", "stepdown", "wbh")
PROCESS_FILES = ("statistic", "pvalues", "adjusted")

CONVENTIONS = {
    "window": "I(x) = (x - eta/2, x + eta/2]",
    "center_domain": "[eta/2, 1 - eta/2]",
    "partition": "breaks from eta/2 to 1 - eta/2; segments [tau_{m-1}, tau_m), the last one closed",
    "wbh_weights": "segment length / (1 - eta)",
    "point_report": "i0 = points covered by an accepted window, i1 = [0, 1] minus i0",
    "mc_ties": "replicate values within a relative 1e-9 of the observed value count as exceedances",
}


class InputError(Exception):
    """Malformed or out-of-domain input data."""


class ConfigError(Exception):
    """Infeasible or invalid run configuration."""


# ---------------------------------------------------------------------------
# input
# ---------------------------------------------------------------------------

def _num(text: str, lineno: int, what: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise InputError(f"line {lineno}: cannot parse {what} {text.strip()!r}") from None
    if not math.isfinite(v):
        raise InputError(f"line {lineno}: {what} must be finite")
    return v


def read_occurrences(path, mode: str):
    """Parse an occurrence file.

    Returns
    -------
    sample : PointSample or MarkedSample
    meta : dict
        Domain bounds used for normalization and the label-to-mark map.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    lo, hi = 0.0, 1.0
    domain_given = False
    pos, labels, lines = [], [], []
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            head = row[0].strip()
            if head.startswith("#"):
                if head.lower() == "#domain":
                    if pos or domain_given:
                        raise InputError(f"line {lineno}: domain header must precede the data and appear once")
                    if len(row) != 3:
                        raise InputError(f"line {lineno}: expected '#domain,<lo>,<hi>'")
                    lo, hi = _num(row[1], lineno, "domain bound"), _num(row[2], lineno, "domain bound")
                    if not hi > lo:
                        raise InputError(f"line {lineno}: domain upper bound must exceed the lower bound")
                    domain_given = True
                continue
            if len(row) > 2:
                raise InputError(f"line {lineno}: expected 'position[,label]', got {len(row)} fields")
            v = _num(row[0], lineno, "position")
            if not lo <= v <= hi:
                raise InputError(f"line {lineno}: position {v!r} outside the domain [{lo!r}, {hi!r}]")
            pos.append(v)
            lines.append(lineno)
            lab = row[1].strip() if len(row) == 2 else ""
            if mode == "two-sample" and not lab:
                raise InputError(f"line {lineno}: missing label in two-sample mode")
            labels.append(lab)

    x = (np.asarray(pos, dtype=float) - lo) / (hi - lo) if domain_given else np.asarray(pos, dtype=float)
    x = np.clip(x, 0.0, 1.0)  # affine rounding can overshoot by one ulp
    meta = {"domain": [lo, hi], "domain_header": domain_given, "n": len(pos)}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TiesWarning)
        if mode == "homogeneity":
            sample = PointSample(x)
            meta["labels_ignored"] = any(labels)
        else:
            distinct = []
            for lab, lineno in zip(labels, lines):
                if lab not in distinct:
                    if len(distinct) == 2:
                        raise InputError(f"line {lineno}: unknown label {lab!r}; expected exactly two labels {sorted(distinct)}")
                    distinct.append(lab)
            if len(distinct) == 1:
                raise InputError(f"two-sample mode needs exactly two labels, found only {distinct[0]!r}")
            distinct.sort()
            mark_of = {lab: (1 if i == 0 else -1) for i, lab in enumerate(distinct)}
            marks = np.array([mark_of[lab] for lab in labels], dtype=np.int8)
            order = np.argsort(x, kind="stable")
            sample = MarkedSample(PointSample(x[order]), marks[order])
            meta["labels"] = {"+1": distinct[0] if distinct else None, "-1": distinct[1] if distinct else None}
    meta["ties"] = any(issubclass(w.category, TiesWarning) for w in caught)
    return sample, meta


def ingest(path, mode: str):
    """Occurrence file to a PointSample (homogeneity) or MarkedSample (two-sample)."""
    return read_occurrences(path, mode)[0]


# ---------------------------------------------------------------------------
# configuration and routing
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    mode: str = "homogeneity"
    statistic: str | None = None
    eta: float = 0.1
    alpha: float = 0.05
    adjustment: str = "minp"
    B: int = 10000
    seed: int | None = None
    bandwidth: float | None = None
    lam: float | None = None
    unbalanced: bool = False

    def kind(self) -> StatisticKind:
        label = self.statistic or ("count-homogeneity" if self.mode == "homogeneity" else "count-two-sample")
        try:
            return StatisticKind.from_label(label)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        kind = self.kind()
        if kind.needs_marks != (self.mode == "two-sample"):
            raise ConfigError(f"statistic {kind.label!r} is not available in {self.mode} mode")
        if self.adjustment not in ADJUSTMENTS:
            raise ConfigError(f"adjustment must be one of {ADJUSTMENTS}")
        if not 0.0 < self.eta < 1.0:
            raise ConfigError("eta must lie in (0, 1)")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if int(self.B) != self.B or self.B < 1:
            raise ConfigError("B must be a positive integer")
        if self.seed is not None and (int(self.seed) != self.seed or self.seed < 0):
            raise ConfigError("seed must be a non-negative integer")
        if self.bandwidth is not None:
            if not kind.kernel_based:
                raise ConfigError("bandwidth only applies to kernel statistics")
            if not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
                raise ConfigError("bandwidth must be positive")
        if self.lam is not None:
            if self.mode != "homogeneity" or kind is not StatisticKind.COUNT_HOMOGENEITY:
                raise ConfigError("lambda only applies to the homogeneity count statistic")
            if not (self.lam > 0 and math.isfinite(self.lam)):
                raise ConfigError("lambda must be positive")
        if self.unbalanced and self.mode != "two-sample":
            raise ConfigError("unbalanced only applies to two-sample mode")
        try:
            worker_count()
        except DomainError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def uses_randomness(self) -> bool:
        return self.kind().kernel_based or self.adjustment != "wbh"


@dataclass(eq=False)
class ResultBundle:
    statistic: StepProcess
    pvalues: StepProcess
    adjusted: StepProcess
    rejection: RejectionSet
    report: PointReport
    summary: dict = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, ResultBundle):
            return NotImplemented
        return (self.statistic == other.statistic and self.pvalues == other.pvalues
                and self.adjusted == other.adjusted and self.rejection == other.rejection
                and self.report == other.report and self.summary == other.summary)


def _intervals_json(s: IntervalSet) -> list:
    return [[iv.left, iv.right, iv.left_closed, iv.right_closed] for iv in s]


def _intervals_from_json(data) -> IntervalSet:
    return IntervalSet(Interval(float(a), float(b), bool(lc), bool(rc)) for a, b, lc, rc in data)


def _display(s: IntervalSet) -> list:
    return [f"[{iv.left:.6g}, {iv.right:.6g}]" for iv in s]


def run(config: RunConfig, data, input_meta: dict | None = None) -> ResultBundle:
    """Route one configuration through the testing pipeline."""
    config.validate()
    kind = config.kind()
    if kind.needs_marks != isinstance(data, MarkedSample):
        raise ConfigError(f"{config.mode} mode does not match the supplied data")
    eta, alpha, B = check_eta(config.eta), config.alpha, int(config.B)
    randomized = config.uses_randomness()
    seed = resolve_seed(config.seed) if randomized else None
    k = None
    if kind.kernel_based:
        k = Kernel(config.bandwidth if config.bandwidth is not None else eta)
    stages, extra = 0, {}
    minp = config.adjustment in ("minp", "stepdown")

    if config.mode == "homogeneity":
        n = len(data)
        if kind is StatisticKind.COUNT_HOMOGENEITY:
            if config.lam is not None:
                p = pvalue_homog_known_lambda(data, eta, config.lam)
                extra["null_law"] = f"Poisson(eta * lambda), lambda = {config.lam!r}"
            else:
                p = pvalue_homog_conditional(data, eta)
                extra["null_law"] = f"Binomial(N([0,1]) = {n}, eta)"
            law = ExactCountLaw(n, eta, config.lam)
        else:
            p, null_sample = mc_pvalue_homogeneity(kind, data, eta, k, B, seed)
            law = MonteCarloLaw(kind, n, eta, k, null_sample)
            stages += 1
            extra["null_law"] = "Monte-Carlo single-window draws given N([0,1])"
        if minp:
            q = minp_adjust_mc_homogeneity(p, law, B, seed, keep_processes=config.adjustment == "stepdown")
            stages += 1
            extra["minp_null"] = "full-null processes given N([0,1])" if config.lam is None \
                else "full-null processes with Poisson(lambda) totals"
    else:
        n_a, n_b = data.n_a, data.n_b
        null_prob = 0.5
        if config.unbalanced and n_a and n_b:
            null_prob = n_a / (n_a + n_b)
        extra["null_prob"] = null_prob
        extra["n_a"], extra["n_b"] = n_a, n_b
        if kind is StatisticKind.COUNT_TWO_SAMPLE:
            p = pvalue_two_sample_count(data, eta, null_prob)
            if minp:
                _, ens = mc_pvalue_two_sample(kind, data, eta, None, B, seed, null_prob)
                q = minp_adjust_two_sample_exact(p, ens)
                stages += 1
        else:
            p, ens = mc_pvalue_two_sample(kind, data, eta, k, B, seed, null_prob)
            stages += 1
            if minp:
                q = minp_adjust_double_mc_two_sample(ens)
        if minp or kind.kernel_based:
            extra["mark_ensembles_drawn"] = ens.meta["mark_ensembles_drawn"]

    if config.adjustment == "wbh":
        res = wbh_adjust(p, alpha)
        adjusted, rejection = res.adjusted, res.rejected
        extra["v_alpha"], extra["k_hat"] = res.v_alpha, res.k_hat
    else:
        adjusted = q
        if config.adjustment == "stepdown":
            rejection = stepdown_minp(p, q.null, alpha)
            extra["experimental"] = "step-down with Monte-Carlo restricted infima"
        else:
            rejection = reject_at_level(q, alpha)
    report = centers_to_points(rejection, eta)

    summary = {
        "config": {
            "mode": config.mode, "statistic": kind.label, "eta": eta, "alpha": alpha,
            "adjustment": config.adjustment, "B": B if randomized else None,
            "bandwidth": k.bandwidth if k is not None else None,
            "lambda": config.lam, "unbalanced": bool(config.unbalanced),
        },
        "provenance": {
            "seed": seed,
            "monte_carlo_stages": stages,
            "routing": "exact" if stages == 0 else f"{stages}-stage Monte-Carlo",
            "p_value_kind": getattr(p, "kind", "exact"),
            **extra,
        },
        "input": input_meta or {},
        "conventions": CONVENTIONS,
        "n_segments": adjusted.partition.n_segments,
        "rejected_centers": _intervals_json(rejection.centers),
        "rejected_centers_measure": rejection.measure,
        "i0": _intervals_json(report.i0),
        "i1": _intervals_json(report.i1),
        "display_closed_rounding": {
            "note": "closed-interval rounding for reading only; the exact sets are listed above",
            "rejected_centers": _display(rejection.centers),
            "i1": _display(report.i1),
        },
    }
    summary = json.loads(json.dumps(summary))
    stat = p.statistic if getattr(p, "statistic", None) is not None else p.process
    return ResultBundle(stat, p.process, adjusted.process, rejection, report, summary)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _write_process(path, proc: StepProcess):
    b = proc.partition.breaks
    with open(path, "w", newline="") as fh:
        fh.write("segment_left,segment_right,value\n")
        for lo, hi, v in zip(b[:-1], b[1:], proc.values):
            fh.write(f"{lo:.17g},{hi:.17g},{float(v):.17g}\n")


def _read_process(path, eta: float) -> StepProcess:
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    breaks = np.concatenate([arr[:1, 0], arr[:, 1]])
    return StepProcess(Partition(breaks, eta), arr[:, 2])


def write_bundle(bundle: ResultBundle, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for name in PROCESS_FILES:
        _write_process(os.path.join(out_dir, f"{name}.csv"), getattr(bundle, name))
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(bundle.summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_bundle(out_dir) -> ResultBundle:
    """Re-read a bundle written by :func:`write_bundle`."""
    with open(os.path.join(out_dir, "summary.json")) as fh:
        summary = json.load(fh)
    eta = summary["config"]["eta"]
    alpha = summary["config"]["alpha"]
    procs = {name: _read_process(os.path.join(out_dir, f"{name}.csv"), eta) for name in PROCESS_FILES}
    centers = _intervals_from_json(summary["rejected_centers"])
    part = procs["adjusted"].partition
    mask = part.overlap_mask(centers)
    rejection = RejectionSet(centers, eta, summary["config"]["adjustment"], alpha, mask, part)
    report = PointReport(_intervals_from_json(summary["i0"]), _intervals_from_json(summary["i1"]))
    return ResultBundle(procs["statistic"], procs["pvalues"], procs["adjusted"], rejection, report, summary)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scanpp", description="Multiple testing over all scanning windows of a point process.")
    ap.add_argument("--input", required=True, help="occurrence CSV: position[,label]")
    ap.add_argument("--out-dir", required=True)
    ap.add_argument("--mode", choices=MODES, default="homogeneity")
    ap.add_argument("--stat", default=None, help="statistic label (default: count statistic of the mode)")
    ap.add_argument("--eta", type=float, default=0.1, help="window length on the normalized scale")
    ap.add_argument("--alpha", type=float, default=0.05)
    ap.add_argument("--adjust", choices=ADJUSTMENTS, default="minp")
    ap.add_argument("--B", type=int, default=10000, help="Monte-Carlo replicates per stage")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--bandwidth", type=float, default=None, help="Gaussian kernel bandwidth (default eta)")
    ap.add_argument("--lambda", dest="lam", type=float, default=None, help="known mean total count (homogeneity)")
    ap.add_argument("--unbalanced", action="store_true", help="plug in n_A/(n_A+n_B) as the null mark probability")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = RunConfig(args.mode, args.stat, args.eta, args.alpha, args.adjust, args.B,
                       args.seed, args.bandwidth, args.lam, args.unbalanced)
    try:
        config.validate()
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        data, meta = read_occurrences(args.input, args.mode)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        bundle = run(config, data, meta)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_bundle(bundle, args.out_dir)
    s = bundle.summary
    print(f"{len(bundle.rejection)} rejected center interval(s), measure {bundle.rejection.measure:.6g}; "
          f"results in {args.out_dir}")
    if s["i1"]:
        print("reported points (i1): " + ", ".join(s["display_closed_rounding"]["i1"]))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

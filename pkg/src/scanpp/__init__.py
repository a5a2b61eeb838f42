"""
scanpp: multiple testing over a continuum of scanning windows for Poisson
occurrence processes on [0, 1].

Homogeneity and two-sample tests with count or Gaussian-kernel window
statistics, exact or Monte-Carlo p-value processes, and FWER (min-p) or
FDR (weighted step-up) control over all window centers at once.
"""
from .adjust import (
    AdjustedProcess,
    ProcessNull,
    SharedNull,
    WBHResult,
    minp_adjust,
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
    build_partition,
    center_domain,
    merge_samples,
    window_composition,
)
from .decision import PointReport, RejectionSet, centers_to_points, reject_at_level
from .intervals import Interval, IntervalSet
from .pvalue import (
    ExactCountLaw,
    MCEnsemble,
    MonteCarloLaw,
    PValueProcess,
    binom_survival,
    mc_pvalue_homogeneity,
    mc_pvalue_two_sample,
    poisson_survival,
    pvalue_homog_conditional,
    pvalue_homog_known_lambda,
    pvalue_two_sample_count,
)
from .stats import (
    Kernel,
    StatisticKind,
    count_stat_homogeneity,
    count_stat_two_sample,
    kernel_stat_homog_one_sided,
    kernel_stat_homog_two_sided,
    kernel_stat_two_sample,
    kernel_stat_two_sample_one_sided,
    scan_statistic,
    statistic_process,
)

__version__ = "0.1.0"

import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scanpp.adjust import (
    ProcessNull,
    SharedNull,
    minp_adjust,
    minp_adjust_double_mc_two_sample,
    minp_adjust_mc_homogeneity,
    minp_adjust_two_sample_exact,
    minp_from_minima,
    segment_weights,
    stepdown_minp,
    wbh_adjust,
)
from scanpp.core import DomainError, MarkedSample, Partition, PointSample, StepProcess, build_partition
from scanpp.decision import reject_at_level
from scanpp.intervals import IntervalSet
from scanpp.pvalue import (
    ExactCountLaw,
    MCEnsemble,
    PValueProcess,
    mc_pvalue_two_sample,
    pvalue_homog_conditional,
    pvalue_two_sample_count,
)
from scanpp.stats import StatisticKind


def pproc(breaks, values, eta=0.2):
    return PValueProcess(StepProcess(Partition(breaks, eta), np.asarray(values, dtype=float)))


def wbh_by_definition(p, w, alpha):
    """Step-up written directly from its definition, in exact arithmetic."""
    order = sorted(range(len(p)), key=lambda i: p[i])
    k_hat, cum = 0, Fraction(0)
    for k, i in enumerate(order, start=1):
        cum += w[i]
        if Fraction(p[i]) <= Fraction(alpha) * cum:
            k_hat = k
    V = Fraction(alpha) * sum((w[i] for i in order[:k_hat]), Fraction(0))
    return k_hat, V


def test_wbh_worked_example():
    p = pproc([0.1, 0.3, 0.6, 0.9], [0.01, 0.5, 0.04])
    res = wbh_adjust(p, 0.1)
    np.testing.assert_allclose(res.weights, [0.25, 0.375, 0.375], rtol=1e-14)
    assert res.k_hat == 2
    assert res.v_alpha == pytest.approx(0.0625, rel=1e-14)
    np.testing.assert_array_equal(res.rejected.mask, [True, False, True])


def test_wbh_all_ones_rejects_nothing():
    res = wbh_adjust(pproc([0.1, 0.5, 0.9], [1.0, 1.0]), 0.2)
    assert res.k_hat == 0 and res.v_alpha == 0 and res.rejected.empty


@pytest.mark.parametrize("p, rejected", [(0.05, True), (0.1, True), (0.11, False)])
def test_wbh_single_segment_is_single_test(p, rejected):
    res = wbh_adjust(pproc([0.1, 0.9], [p]), 0.1)
    assert (not res.rejected.empty) == rejected


def test_wbh_alpha_domain():
    with pytest.raises(DomainError):
        wbh_adjust(pproc([0.1, 0.9], [0.5]), 1.0)


breaks_strategy = st.lists(st.floats(0.0501, 0.9499), max_size=30, unique=True)
p_strategy = st.floats(1e-6, 1.0)


@given(breaks_strategy, st.data())
def test_wbh_against_definition_and_self_consistent(inner, data):
    breaks = np.unique(np.concatenate([[0.05], inner, [0.95]]))
    M = breaks.size - 1
    vals = data.draw(st.lists(st.one_of(p_strategy, st.sampled_from([0.01, 0.03, 1.0])), min_size=M, max_size=M))
    p = pproc(breaks, vals, eta=0.1)
    w = segment_weights(p.partition)
    assert sum(w) == 1
    for alpha in np.linspace(0.01, 0.5, 20):
        res = wbh_adjust(p, alpha)
        k_hat, V = wbh_by_definition(vals, w, alpha)
        assert res.k_hat == k_hat and res.v_alpha_exact == V
        raw = np.array([Fraction(v) <= V for v in vals])
        np.testing.assert_array_equal(res.rejected.mask, raw)
        np.testing.assert_array_equal(res.adjusted.values <= alpha, raw)
        assert np.all(res.adjusted.values >= np.asarray(vals))
        assert np.all(res.adjusted.values <= 1.0)


def test_minp_from_minima_formula():
    minima = [0.01, 0.2, 0.2, 0.5]
    np.testing.assert_allclose(minp_from_minima([0.001, 0.2, 1.0], minima), [0.2, 0.8, 1.0])


def test_minp_homogeneity_trivial_bounds(rng):
    n = PointSample(rng.random(300))
    p = pvalue_homog_conditional(n, 0.1)
    B2 = 99
    q = minp_adjust_mc_homogeneity(p, ExactCountLaw(len(n), 0.1), B2=B2, seed2=1)
    assert q.method == "minp-mc" and q.B == B2
    np.testing.assert_allclose(q.values * (B2 + 1), np.round(q.values * (B2 + 1)), atol=1e-9)
    assert np.all(q.values[p.values == 1.0] == 1.0)
    assert np.all(q.values >= 1 / (B2 + 1))
    tiny = p.process.with_values(np.full(p.partition.n_segments, 1e-300))
    assert np.all(minp_adjust(tiny, q.null).values == 1 / (B2 + 1))


def test_minp_homogeneity_orders_like_scan_statistic(rng):
    # q is a nondecreasing function of p, and p a nonincreasing function of S
    n = PointSample(np.concatenate([rng.random(250), 0.6 + 0.05 * rng.random(25)]))
    p = pvalue_homog_conditional(n, 0.1)
    q = minp_adjust_mc_homogeneity(p, ExactCountLaw(len(n), 0.1), B2=199, seed2=3)
    S = p.statistic.values
    order = np.argsort(-S, kind="stable")
    assert np.all(np.diff(q.values[order]) >= 0)
    assert q.values[S == S.max()].max() == q.values.min()
    # each replicate infimum is the tail at that replicate's scan statistic
    assert np.all(q.null.global_minima <= 1.0)


def test_minp_homogeneity_reproducible_and_keeps_processes(rng):
    n = PointSample(rng.random(100))
    p = pvalue_homog_conditional(n, 0.2)
    law = ExactCountLaw(len(n), 0.2)
    a = minp_adjust_mc_homogeneity(p, law, B2=30, seed2=11)
    b = minp_adjust_mc_homogeneity(p, law, B2=30, seed2=11, keep_processes=True)
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.null.global_minima, [pr.values.min() for pr in b.null.processes])
    with pytest.raises(DomainError):
        minp_adjust_mc_homogeneity(p, law, B2=0)


def test_minp_homogeneity_unconditional_draws_poisson_totals(rng):
    n = PointSample(rng.random(100))
    from scanpp.adjust import simulate_full_null
    law = ExactCountLaw(len(n), 0.2, lam=100.0)
    sizes = [len(simulate_full_null(law, b, 5)) for b in range(200)]
    assert len(set(sizes)) > 5 and abs(np.mean(sizes) - 100) < 4


def test_double_mc_identical_replicates_give_one():
    part = Partition([0.1, 0.4, 0.9], 0.2)
    stats = np.tile([2.0, 3.0], (11, 1))
    ens = MCEnsemble(part, stats, 10, 0, StatisticKind.KERNEL_TWO_SAMPLE, unit=1.0)
    q = minp_adjust_double_mc_two_sample(ens)
    assert np.all(q.values == 1.0)


def test_double_mc_matches_direct_formula(rng):
    m = MarkedSample(PointSample(rng.random(40)), np.where(rng.random(40) < 0.5, 1, -1))
    B = 39
    p, ens = mc_pvalue_two_sample(StatisticKind.COUNT_TWO_SAMPLE, m, 0.2, B=B, seed=2)
    q = minp_adjust_double_mc_two_sample(ens)
    S = ens.stats
    pb = (S[None, :, :] >= S[:, None, :]).sum(axis=1) / (B + 1)
    mb = pb[1:].min(axis=1)
    ref = (1 + (mb[None, :] <= pb[0][:, None]).sum(axis=1)) / (B + 1)
    np.testing.assert_allclose(q.values, ref)
    np.testing.assert_allclose(pb[0], p.values)
    assert np.all(q.values >= p.values * B / (B + 1) - 1e-15)


def test_double_mc_enumeration_controls_fwer():
    pts = PointSample([0.12, 0.3, 0.33, 0.5, 0.61, 0.8])
    reps = np.array(list(itertools.product([1, -1], repeat=6)), dtype=np.int8)
    qmins = []
    for obs in reps:
        _, ens = mc_pvalue_two_sample(StatisticKind.COUNT_TWO_SAMPLE, MarkedSample(pts, obs), 0.2,
                                      replicate_marks=reps)
        qmins.append(minp_adjust_double_mc_two_sample(ens).values.min())
    qmins = np.array(qmins)
    for alpha in (0.05, 0.1, 0.25):
        assert np.mean(qmins <= alpha) <= alpha


def test_two_sample_exact_minp_uses_binomial_replicates(rng):
    m = MarkedSample(PointSample(rng.random(60)), np.where(rng.random(60) < 0.5, 1, -1))
    p = pvalue_two_sample_count(m, 0.1)
    _, ens = mc_pvalue_two_sample(StatisticKind.COUNT_TWO_SAMPLE, m, 0.1, B=49, seed=1)
    q = minp_adjust_two_sample_exact(p, ens)
    assert q.null.values.shape == (49, p.partition.n_segments)
    # replicate 1 reproduces the exact p-values of its own marks
    from scanpp.pvalue import draw_marks
    marks1 = draw_marks(60, 49, 1)[0]
    ref = pvalue_two_sample_count(MarkedSample(m.joint, marks1), 0.1).values
    np.testing.assert_array_equal(q.null.values[0], ref)
    order = np.argsort(p.values, kind="stable")
    assert np.all(np.diff(q.values[order]) >= 0)


def test_stepdown_without_rejection_equals_single_step():
    p = pproc([0.1, 0.5, 0.9], [0.9, 0.8])
    null = SharedNull(p.partition, np.full((9, 2), 0.5))
    r = stepdown_minp(p, null, 0.1)
    assert r.empty and r == reject_at_level(minp_adjust(p, null), 0.1)


def test_stepdown_single_segment_equals_single_step():
    p = pproc([0.1, 0.9], [0.01])
    null = SharedNull(p.partition, np.linspace(0.005, 1, 19)[:, None])
    assert stepdown_minp(p, null, 0.1) == reject_at_level(minp_adjust(p, null), 0.1)


def test_stepdown_strictly_extends_when_strong_signal_is_removed():
    # replicate minima on segment 0 are small; once segment 0 is rejected the
    # restricted minima grow and segment 1 becomes significant
    p = pproc([0.1, 0.3, 0.6, 0.9], [0.001, 0.02, 0.9])
    B = 19
    vals = np.column_stack([np.linspace(0.001, 0.1, B), np.linspace(0.05, 1, B), np.linspace(0.05, 1, B)])
    null = SharedNull(p.partition, vals)
    single = reject_at_level(minp_adjust(p, null), 0.1)
    step = stepdown_minp(p, null, 0.1)
    np.testing.assert_array_equal(single.mask, [True, False, False])
    np.testing.assert_array_equal(step.mask, [True, True, False])
    assert single.issubset(step) and step.source == "minp-stepdown-mc"


def test_stepdown_contains_single_step_on_simulated_two_signal_data():
    rng = np.random.default_rng(8)
    pts = np.sort(rng.random(400))
    prob = np.where((pts > 0.2) & (pts < 0.26), 0.95, np.where((pts > 0.65) & (pts < 0.72), 0.75, 0.5))
    m = MarkedSample(PointSample(pts), np.where(rng.random(400) < prob, 1, -1))
    p, ens = mc_pvalue_two_sample(StatisticKind.KERNEL_TWO_SAMPLE_ONE_SIDED, m, 0.1, B=199, seed=3)
    q = minp_adjust_double_mc_two_sample(ens)
    for alpha in (0.05, 0.1, 0.2):
        single = reject_at_level(q, alpha)
        assert single.issubset(stepdown_minp(p, q.null, alpha))


def test_process_null_restricted_minima():
    pa = StepProcess(Partition([0.1, 0.5, 0.9], 0.2), np.array([0.2, 0.6]))
    pb = StepProcess(Partition([0.1, 0.3, 0.9], 0.2), np.array([0.9, 0.4]))
    null = ProcessNull([pa, pb])
    np.testing.assert_array_equal(null.minima(), [0.2, 0.4])
    from scanpp.intervals import Interval
    np.testing.assert_array_equal(null.minima(IntervalSet([Interval(0.6, 0.9)])), [0.6, 0.4])
    with pytest.raises(ValueError):
        ProcessNull(global_minima=[0.1]).minima(IntervalSet([Interval(0.6, 0.9)]))


def test_shared_null_empty_region_gives_infinite_minima():
    null = SharedNull(Partition([0.1, 0.9], 0.2), np.ones((3, 1)))
    assert np.all(null.minima(IntervalSet()) == np.inf)


def test_weights_sum_to_one_exactly_for_random_partitions(rng):
    for _ in range(50):
        n = PointSample(rng.random(rng.integers(0, 40)))
        w = segment_weights(build_partition(n, float(rng.uniform(0.01, 0.5))))
        assert sum(w) == Fraction(1)

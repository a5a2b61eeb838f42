import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scanpp.core import (
    DomainError,
    MarkedSample,
    Partition,
    PointSample,
    StepProcess,
    TiesWarning,
    build_partition,
    center_domain,
    merge_samples,
    parallel_map,
    replicate_rng,
    window_composition,
    window_ranges,
    worker_count,
)
from scanpp.intervals import Interval, IntervalSet

positions = st.lists(st.floats(0.0, 1.0, allow_nan=False), max_size=25, unique=True)
etas = st.floats(0.02, 0.9)


def composition_by_definition(points, x, eta):
    # direct membership test x - eta/2 < T <= x + eta/2, in the same float form
    h = eta / 2
    return [t for t in points if t - h <= x < t + h]


def test_point_sample_sorts_and_freezes():
    s = PointSample([0.6, 0.1, 0.3])
    np.testing.assert_array_equal(s.points, [0.1, 0.3, 0.6])
    with pytest.raises(ValueError):
        s.points[0] = 0.5


@pytest.mark.parametrize("bad", [[-0.1], [1.2], [np.nan], [np.inf]])
def test_point_sample_rejects_out_of_range(bad):
    with pytest.raises(DomainError):
        PointSample(bad)


def test_point_sample_ties_warn():
    with pytest.warns(TiesWarning):
        s = PointSample([0.2, 0.2, 0.5])
    assert s.has_ties and len(s) == 3


def test_marked_sample_validation():
    with pytest.raises(DomainError):
        MarkedSample(PointSample([0.1, 0.2]), [1])
    with pytest.raises(DomainError):
        MarkedSample(PointSample([0.1]), [0])
    m = MarkedSample(PointSample([0.1, 0.2, 0.3]), [1, -1, 1])
    assert (m.n_a, m.n_b) == (2, 1)


@pytest.mark.parametrize("a, b, joint, marks", [
    ([0.2], [0.5], [0.2, 0.5], [1, -1]),
    ([], [0.5], [0.5], [-1]),
    ([0.3, 0.7], [0.5], [0.3, 0.5, 0.7], [1, -1, 1]),
])
def test_merge_samples_examples(a, b, joint, marks):
    m = merge_samples(PointSample(a), PointSample(b))
    np.testing.assert_array_equal(m.joint.points, joint)
    np.testing.assert_array_equal(m.marks, marks)


def test_merge_samples_ties_put_a_first():
    with pytest.warns(TiesWarning):
        m = merge_samples(PointSample([0.4]), PointSample([0.4]))
    np.testing.assert_array_equal(m.marks, [1, -1])


@given(positions, positions)
def test_merge_split_round_trip(a, b):
    b = [t for t in b if t not in set(a)]
    pa, pb = PointSample(a), PointSample(b)
    ra, rb = merge_samples(pa, pb).split()
    assert ra == pa and rb == pb


@pytest.mark.parametrize("pts, x, expected", [
    ([0.3, 0.6], 0.35, [0.3]),
    ([0.3], 0.2, [0.3]),  # right end included
    ([0.3], 0.4, []),  # left end excluded
])
def test_window_composition_examples(pts, x, expected):
    np.testing.assert_array_equal(window_composition(PointSample(pts), x, 0.2).points, expected)


@pytest.mark.parametrize("x", [0.05, 0.95, -1.0])
def test_window_composition_outside_domain(x):
    with pytest.raises(DomainError):
        window_composition(PointSample([0.5]), x, 0.2)


def test_center_domain_is_closed():
    d = center_domain(0.2)
    assert d.left == 0.1 and d.right == 0.9 and d.left_closed and d.right_closed
    with pytest.raises(DomainError):
        center_domain(1.0)


@pytest.mark.parametrize("pts, breaks", [
    ([0.3, 0.6], [0.1, 0.2, 0.4, 0.5, 0.7, 0.9]),
    ([], [0.1, 0.9]),
    ([0.05], [0.1, 0.15, 0.9]),
])
def test_build_partition_examples(pts, breaks):
    part = build_partition(PointSample(pts), 0.2)
    np.testing.assert_allclose(part.breaks, breaks, rtol=0, atol=1e-15)
    assert part.breaks[0] == 0.1 and part.breaks[-1] == 0.9


def test_build_partition_grid_oracle_example():
    n = PointSample([0.3, 0.6])
    part = build_partition(n, 0.2)
    grid = np.linspace(0.1, 0.9, 10_001)
    seg = part.locate(grid)
    for m in range(part.n_segments):
        comps = {tuple(composition_by_definition(n.points, x, 0.2)) for x in grid[seg == m]}
        assert len(comps) == 1


@given(positions, etas)
def test_composition_constant_on_segments(pts, eta):
    n = PointSample(pts)
    part = build_partition(n, eta)
    assert part.breaks.size <= 2 * len(n) + 2
    start, end = window_ranges(n, part)
    for m in range(part.n_segments):
        lo, hi = part.breaks[m], part.breaks[m + 1]
        expected = list(n.points[start[m]:end[m]])
        for x in (lo, 0.5 * (lo + hi), np.nextafter(hi, lo)):
            assert composition_by_definition(n.points, x, eta) == expected
    # the closed right end is attached to the last segment; its own window
    # differs only if a point enters or leaves exactly there
    x_end = part.breaks[-1]
    h = eta / 2
    event_at_end = np.any((n.points - h == x_end) | (n.points + h == x_end))
    last = composition_by_definition(n.points, x_end, eta)
    assert (last == list(n.points[start[-1]:end[-1]])) or event_at_end


def test_partition_validation_and_locate():
    with pytest.raises(DomainError):
        Partition([0.1, 0.1, 0.9], 0.2)
    part = Partition([0.1, 0.3, 0.9], 0.2)
    np.testing.assert_array_equal(part.locate([0.1, 0.29, 0.3, 0.9]), [0, 0, 1, 1])
    with pytest.raises(DomainError):
        part.locate(0.95)
    assert part.segment_interval(1) == Interval(0.3, 0.9, True, True)


def test_mask_to_set_and_overlap():
    part = Partition([0.1, 0.2, 0.4, 0.9], 0.2)
    s = part.mask_to_set([True, True, False])
    assert s == IntervalSet([Interval(0.1, 0.4, True, False)])
    last = part.mask_to_set([False, False, True])
    assert last == IntervalSet([Interval(0.4, 0.9, True, True)])
    np.testing.assert_array_equal(part.overlap_mask(IntervalSet([Interval(0.3, 0.5)])), [False, True, True])
    # touching at a single point is not an overlap
    np.testing.assert_array_equal(part.overlap_mask(IntervalSet([Interval(0.4, 0.4, True, True)])), [False] * 3)


def test_step_process_evaluation():
    part = Partition([0.1, 0.2, 0.4, 0.9], 0.2)
    f = StepProcess(part, np.array([3.0, 1.0, 2.0]))
    assert f(0.2) == 1.0  # right-continuous
    assert f(0.9) == 2.0
    np.testing.assert_array_equal(f([0.15, 0.5]), [3.0, 2.0])
    assert f.min() == 1.0
    assert f.min(IntervalSet([Interval(0.45, 0.6)])) == 2.0
    assert f.min(IntervalSet()) == np.inf
    with pytest.raises(DomainError):
        StepProcess(part, [1.0, 2.0])


def test_replicate_rng_is_counter_based():
    a = replicate_rng(7, 2, 5).random(4)
    b = replicate_rng(7, 2, 5).random(4)
    c = replicate_rng(7, 2, 6).random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_worker_count_and_parallel_map(monkeypatch):
    monkeypatch.delenv("SCANPP_THREADS", raising=False)
    assert worker_count() == 1
    monkeypatch.setenv("SCANPP_THREADS", "3")
    assert worker_count() == 3
    assert parallel_map(lambda v: v * v, range(10)) == [v * v for v in range(10)]
    monkeypatch.setenv("SCANPP_THREADS", "zero")
    with pytest.raises(DomainError):
        worker_count()


def test_window_composition_ignores_tie_warning_inside():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TiesWarning)
        n = PointSample([0.5, 0.5])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert len(window_composition(n, 0.5, 0.2)) == 2

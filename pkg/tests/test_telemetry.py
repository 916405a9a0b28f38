import math
import random

import pytest

from tailsim.telemetry import (MarkCensusResult, convergence_time,
                               cdf_percentile, hist_percentile, merge_hists,
                               multi_mark_fraction, per_rtt_throughput,
                               percentile, queue_cdf)


def oracle_percentile(samples, p):
    """Independent nearest-rank reference: explicit sort and rank count."""
    ordered = sorted(samples)
    rank = 0
    target = p * len(samples) / 100.0
    while rank < len(ordered) and rank < target:
        rank += 1
    return ordered[max(rank - 1, 0)]


def test_percentile_singleton():
    assert percentile([7], 99) == 7


def test_percentile_on_1_to_100():
    data = list(range(1, 101))
    random.Random(1).shuffle(data)
    assert percentile(data, 99) == 99
    assert percentile(data, 50) == 50
    assert percentile(data, 100) == 100
    assert percentile(data, 1) == 1


def test_percentile_matches_oracle_on_random_sets():
    rnd = random.Random(42)
    for _ in range(1000):
        n = rnd.randint(1, 60)
        samples = [rnd.uniform(0, 1e6) for _ in range(n)]
        p = rnd.choice((1, 25, 50, 75, 90, 95, 99, 100))
        assert percentile(samples, p) == oracle_percentile(samples, p)


def test_percentile_rejects_bad_input():
    with pytest.raises(ValueError):
        percentile([], 99)
    with pytest.raises(ValueError):
        percentile([1], 0)
    with pytest.raises(ValueError):
        percentile([1], 101)


def test_queue_cdf_matches_direct_enumeration():
    # ten hand-built samples with known holding times
    samples = [(0, 0), (10, 1500), (30, 3000), (40, 1500), (70, 0),
               (100, 4500), (110, 3000), (130, 1500), (150, 0), (180, 0)]
    cdf = queue_cdf(samples, end_ns=200)
    # durations per occupancy: 0 : 10+30+(200-150)+... enumerate by hand
    # 0ns->10 @0; 10->30 @1500; 30->40 @3000; 40->70 @1500; 70->100 @0;
    # 100->110 @4500; 110->130 @3000; 130->150 @1500; 150->200 @0
    weights = {0: 10 + 30 + 50, 1500: 20 + 30 + 20, 3000: 10 + 20, 4500: 10}
    total = sum(weights.values())
    expected = []
    cum = 0
    for occ in sorted(weights):
        cum += weights[occ]
        expected.append((occ, cum / total))
    assert cdf == expected


def test_queue_cdf_all_zero_samples():
    cdf = queue_cdf([(0, 0), (10, 0)], end_ns=20)
    assert cdf == [(0, 1.0)]
    assert cdf_percentile(cdf, 99) == 0


def test_queue_cdf_rejects_empty():
    with pytest.raises(ValueError):
        queue_cdf([])


def test_hist_percentile_and_merge():
    a = [0, 10, 0, 0]
    b = [0, 0, 0, 10]
    merged = merge_hists([a, b])
    assert merged == [0, 10, 0, 10]
    assert hist_percentile(merged, 50) == 1
    assert hist_percentile(merged, 99) == 3
    assert hist_percentile([0, 0], 99) == 0


def test_convergence_already_at_fair_share():
    fair = 1.0
    series = [1.0] * 10
    assert convergence_time(series, fair, tol=0.1) == 0


def test_convergence_finds_first_stable_window():
    fair = 1.0
    series = [3.0, 2.0, 1.05, 0.97, 1.02, 1.0, 1.0]
    assert convergence_time(series, fair, tol=0.1) == 2


def test_convergence_reports_infinity_when_never_stable():
    assert convergence_time([5.0, 4.0, 3.0], 1.0, tol=0.1) == math.inf
    assert convergence_time([1.0, 9.0, 1.0, 9.0, 1.0], 1.0, tol=0.1) == math.inf


def test_multi_mark_fraction_matches_enumeration():
    # three flows: tail flow 2 has 4 packets, one marked at 2 hops and one
    # at 3; flows 0 and 1 sit below the cutoff
    census = [
        [10, 0, 0, 0, 0, 0],
        [8, 2, 0, 0, 0, 0],
        [2, 0, 1, 1, 0, 0],
    ]
    fct = {0: 100, 1: 200, 2: 1000}
    out = multi_mark_fraction(census, fct, tail_percentile=50.0,
                              min_tail_packets=1)
    # cutoff is the median (200); only flow 2 exceeds it
    assert out.fraction == pytest.approx(2 / 4)
    assert out.tail_packets == 4
    assert not out.low_confidence


def test_multi_mark_zero_when_nothing_marked():
    census = [[5, 0, 0, 0, 0, 0], [5, 0, 0, 0, 0, 0]]
    out = multi_mark_fraction(census, {0: 10, 1: 99}, tail_percentile=50.0)
    assert out.fraction == 0.0
    assert out.low_confidence  # tiny sample flags itself


def test_multi_mark_requires_completed_flows():
    with pytest.raises(ValueError):
        multi_mark_fraction([], {})


def test_long_flow_throughput_example():
    from tailsim.telemetry import FctSample, long_flow_throughput_bps
    s = FctSample(0, "long", 1_000_000, 0, 1, 0, 1_000_000)  # 1 MB in 1 ms
    assert long_flow_throughput_bps([s]) == pytest.approx(8e9)
    with pytest.raises(ValueError):
        long_flow_throughput_bps([])


def test_per_rtt_throughput_bins():
    # 1000 bytes acked every 100 ns, starting at t=0
    progress = [(i * 100, (i + 1) * 1000) for i in range(10)]
    series = per_rtt_throughput(progress, 0, 200)
    # two acks per bin once past the first edge
    assert series[0] == pytest.approx(2 * 1000 * 8e9 / 200 / 1e9 * 1e9 / 1e9 * 1.0, rel=1)
    assert len(series) >= 4
    total_bytes = series_sum = sum(v * 200 / 8e9 for v in series)
    assert total_bytes == pytest.approx(10_000 - 1000, rel=0.01)

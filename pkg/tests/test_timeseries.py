import numpy as np
import pytest

from greenmeter.errors import (
    ConfigurationError,
    DataError,
    InvalidRangeError,
    OutOfOrderError,
)
from greenmeter.timeseries import (
    AlignedSample,
    Consolidation,
    RoundRobinArchive,
    TimeSeries,
    align,
)


def test_series_rejects_decreasing_epochs():
    with pytest.raises(OutOfOrderError):
        TimeSeries(1, [2, 1], [0.0, 0.0])


def test_series_rejects_off_step_epochs():
    with pytest.raises(ConfigurationError):
        TimeSeries(10, [0, 15], [0.0, 0.0])


def test_series_rejects_nonfinite_values():
    with pytest.raises(DataError):
        TimeSeries(1, [0, 1], [1.0, float("nan")])


def test_value_at_exact_hit_and_miss():
    ts = TimeSeries(1, [5, 7, 9], [1.0, 2.0, 3.0])
    assert ts.value_at(7) == 2.0
    with pytest.raises(KeyError):
        ts.value_at(6)


def test_eviction_keeps_newest():
    rrd = RoundRobinArchive(capacity=2, step_seconds=1)
    for epoch, value in [(0, 1.0), (1, 2.0), (2, 3.0)]:
        rrd.push(epoch, value)
    assert rrd.ring == ((1, 2.0), (2, 3.0))


def test_average_of_pairs():
    rrd = RoundRobinArchive(capacity=10, step_seconds=1, consolidation_factor=2)
    for epoch, value in enumerate([1.0, 2.0, 3.0, 4.0]):
        rrd.push(epoch, value)
    assert [v for _, v in rrd.ring] == [1.5, 3.5]


def test_max_bucketing_matches_bruteforce():
    rng = np.random.default_rng(101)
    values = rng.uniform(-50, 50, size=300)
    rrd = RoundRobinArchive(
        capacity=1000, step_seconds=1, consolidation=Consolidation.MAX, consolidation_factor=3
    )
    for epoch, value in enumerate(values):
        rrd.push(epoch, float(value))
    expected = [max(values[i : i + 3]) for i in range(0, 300, 3)]
    assert [v for _, v in rrd.ring] == expected


def test_average_bucketing_matches_bruteforce():
    rng = np.random.default_rng(102)
    values = [float(v) for v in rng.uniform(0, 10, size=300)]
    rrd = RoundRobinArchive(capacity=1000, step_seconds=1, consolidation_factor=4)
    for epoch, value in enumerate(values):
        rrd.push(epoch, value)
    expected = [sum(values[i : i + 4]) / 4 for i in range(0, 300, 4)]
    assert [v for _, v in rrd.ring] == expected


def test_average_of_constant_is_exact():
    for factor in (1, 2, 3, 7):
        rrd = RoundRobinArchive(capacity=100, step_seconds=1, consolidation_factor=factor)
        for epoch in range(factor * 5):
            rrd.push(epoch, 0.1)
        assert all(v == 0.1 for _, v in rrd.ring)


def test_partial_bucket_readable():
    rrd = RoundRobinArchive(capacity=10, step_seconds=1, consolidation_factor=3)
    rrd.push(0, 2.0)
    rrd.push(1, 4.0)
    assert rrd.ring == ()
    assert rrd.partial == (1, 3.0)
    rrd.push(2, 6.0)
    assert rrd.partial is None
    assert rrd.ring == ((2, 4.0),)


def test_push_rejects_non_monotone_epoch():
    rrd = RoundRobinArchive(capacity=4, step_seconds=1)
    rrd.push(5, 1.0)
    with pytest.raises(OutOfOrderError):
        rrd.push(5, 1.0)
    with pytest.raises(OutOfOrderError):
        rrd.push(4, 1.0)


def test_push_rejects_nonfinite_value():
    rrd = RoundRobinArchive(capacity=4, step_seconds=1)
    with pytest.raises(DataError):
        rrd.push(0, float("inf"))


def test_ring_length_bound_random_sequences():
    rng = np.random.default_rng(103)
    for _ in range(20):
        capacity = int(rng.integers(1, 20))
        factor = int(rng.integers(1, 5))
        rrd = RoundRobinArchive(capacity=capacity, step_seconds=1, consolidation_factor=factor)
        epoch = 0
        for _ in range(int(rng.integers(1, 200))):
            epoch += int(rng.integers(1, 4))
            rrd.push(epoch, float(rng.normal()))
            assert len(rrd.ring) <= capacity


def test_fetch_full_and_disjoint_windows():
    rrd = RoundRobinArchive(capacity=10, step_seconds=1)
    for epoch in range(5):
        rrd.push(epoch, float(epoch))
    assert rrd.fetch(0, 4).samples == [(e, float(e)) for e in range(5)]
    assert len(rrd.fetch(100, 200)) == 0


def test_fetch_rejects_inverted_range():
    rrd = RoundRobinArchive(capacity=4, step_seconds=1)
    with pytest.raises(InvalidRangeError):
        rrd.fetch(10, 9)


def test_fetch_windows_match_linear_scan():
    rng = np.random.default_rng(104)
    rrd = RoundRobinArchive(capacity=50, step_seconds=1)
    epoch = 0
    for _ in range(120):
        epoch += int(rng.integers(1, 3))
        rrd.push(epoch, float(rng.normal()))
    ring = rrd.ring
    for _ in range(50):
        t0 = int(rng.integers(0, epoch + 5))
        t1 = t0 + int(rng.integers(0, epoch))
        expected = [(e, v) for e, v in ring if t0 <= e <= t1]
        assert rrd.fetch(t0, t1).samples == expected


def test_fetch_split_union_equals_whole():
    rng = np.random.default_rng(105)
    rrd = RoundRobinArchive(capacity=100, step_seconds=1)
    for epoch in range(80):
        rrd.push(epoch, float(rng.normal()))
    for _ in range(30):
        t0 = int(rng.integers(0, 40))
        t1 = t0 + int(rng.integers(0, 30))
        t2 = t1 + 1 + int(rng.integers(0, 30))
        merged = rrd.fetch(t0, t1).samples + rrd.fetch(t1 + 1, t2).samples
        assert merged == rrd.fetch(t0, t2).samples


def test_align_exact_match_with_zero_gap():
    res = {"cpu": TimeSeries(1, [10, 11], [0.5, 0.6])}
    power = TimeSeries(1, [10, 11], [100.0, 104.0])
    out = align(res, power, max_gap_seconds=0)
    assert [s.epoch_seconds for s in out] == [10, 11]
    assert out[0].resource_values == {"cpu": 0.5}
    assert out[0].power_watts == 100.0


def test_align_drops_samples_beyond_gap():
    res = {"cpu": TimeSeries(1, [10], [0.5])}
    power = TimeSeries(1, [13], [100.0])
    assert align(res, power, max_gap_seconds=2) == []


def test_align_tie_prefers_earlier_power_sample():
    res = {"cpu": TimeSeries(1, [10], [0.5])}
    power = TimeSeries(1, [9, 11], [96.0, 104.0])
    out = align(res, power, max_gap_seconds=1)
    assert len(out) == 1
    assert out[0].power_watts == 96.0


def test_align_requires_matching_steps():
    res = {
        "cpu": TimeSeries(1, [0, 1], [0.1, 0.2]),
        "mem": TimeSeries(2, [0, 2], [0.1, 0.2]),
    }
    with pytest.raises(ConfigurationError):
        align(res, TimeSeries(1, [0], [100.0]), max_gap_seconds=1)


def test_align_keeps_only_common_resource_epochs():
    res = {
        "cpu": TimeSeries(1, [0, 1, 2], [0.1, 0.2, 0.3]),
        "mem": TimeSeries(1, [1, 2, 3], [0.7, 0.8, 0.9]),
    }
    power = TimeSeries(1, [0, 1, 2, 3], [100.0, 100.0, 104.0, 104.0])
    out = align(res, power, max_gap_seconds=0)
    assert [s.epoch_seconds for s in out] == [1, 2]
    assert out[0].resource_values == {"cpu": 0.2, "mem": 0.7}


def test_align_matches_bruteforce_nearest_neighbor():
    rng = np.random.default_rng(106)
    for _ in range(20):
        res_epochs = np.arange(0, 60)
        keep = rng.random(60) > 0.1
        power_epochs = sorted(set(int(e) for e in res_epochs[keep]) | {61, 64})
        res = {"cpu": TimeSeries(1, res_epochs, rng.random(60))}
        power = TimeSeries(1, power_epochs, rng.uniform(96, 140, len(power_epochs)))
        out = align(res, power, max_gap_seconds=1)
        expected = []
        for e in res_epochs:
            best = None
            for pe, pv in power.samples:
                d = abs(pe - int(e))
                if d <= 1 and (best is None or d < best[0]):
                    best = (d, pe, pv)
            if best is not None:
                expected.append((int(e), best[2]))
        assert [(s.epoch_seconds, s.power_watts) for s in out] == expected


def test_align_independent_of_construction_order():
    rng = np.random.default_rng(107)
    epochs = np.arange(30)
    cpu = TimeSeries(1, epochs, rng.random(30))
    mem = TimeSeries(1, epochs, rng.random(30))
    power = TimeSeries(1, epochs, rng.uniform(100, 140, 30))
    a = align({"cpu": cpu, "mem": mem}, power, max_gap_seconds=1)
    b = align({"mem": mem, "cpu": cpu}, power, max_gap_seconds=1)
    assert a == b


def test_aligned_sample_rejects_negative_power():
    with pytest.raises(DataError):
        AlignedSample(0, {"cpu": 0.5}, -1.0)

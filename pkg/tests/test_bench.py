import io
import json
import math
import random
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from mdensemble.bench import (
    BenchConfig, BenchReport, compute_stats, emit_report, parse_report_csv,
    run_benchmark, schedule, speedup_pct,
)

from conftest import ensemble_bytes


def test_median_odd():
    assert compute_stats([1, 2, 3, 4, 5]).median == 3


def test_median_even():
    assert compute_stats([4, 1, 3, 2]).median == 2.5


def test_single_sample():
    st_ = compute_stats([13.3])
    assert st_.median == 13.3
    assert st_.stddev == 0.0
    assert st_.five_number == (13.3,) * 5
    assert st_.hist_counts == [1]


def test_stddev_sample_denominator():
    # hand computation: mean 5, squared deviations sum to 32, n - 1 = 7
    assert compute_stats([2, 4, 4, 4, 5, 5, 7, 9]).stddev == pytest.approx(math.sqrt(32 / 7), rel=1e-12)
    assert compute_stats([2, 4, 4, 4, 5, 5, 7, 9]).stddev == pytest.approx(2.138, abs=5e-4)


def test_against_statistics_module():
    rng = random.Random(1)
    xs = [rng.uniform(10, 20) for _ in range(37)]
    st_ = compute_stats(xs)
    assert st_.median == statistics.median(xs)
    assert st_.stddev == pytest.approx(statistics.stdev(xs), rel=1e-12)
    q1, _, q3 = statistics.quantiles(xs, n=4, method="inclusive")
    assert (st_.q1, st_.q3) == (pytest.approx(q1), pytest.approx(q3))
    assert (st_.min, st_.max) == (min(xs), max(xs))


def test_histogram_rule():
    xs = list(range(1, 11))
    st_ = compute_stats(xs)
    assert len(st_.hist_counts) == 4  # ceil(sqrt(10))
    assert sum(st_.hist_counts) == 10
    assert st_.hist_edges[0] == 1 and st_.hist_edges[-1] == 10
    widths = np.diff(st_.hist_edges)
    assert np.allclose(widths, widths[0])


def test_empty_samples():
    with pytest.raises(ValueError):
        compute_stats([])


@settings(max_examples=200)
@given(st.lists(st.floats(0.0, 1e6, allow_nan=False), min_size=1, max_size=60), st.randoms())
def test_order_insensitive(xs, rnd):
    shuffled = xs[:]
    rnd.shuffle(shuffled)
    a, b = compute_stats(xs), compute_stats(shuffled)
    assert a.five_number == b.five_number
    assert a.stddev == pytest.approx(b.stddev, rel=1e-9, abs=1e-9)


@settings(max_examples=200)
@given(st.lists(st.integers(0, 10**6), min_size=1, max_size=60), st.integers(-1000, 10**6))
def test_shift(xs, c):
    a = compute_stats(xs)
    b = compute_stats([x + c for x in xs])
    assert b.median == a.median + c
    assert b.stddev == pytest.approx(a.stddev, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("base, improved, expected", [
    (13.3, 10.6, 20.3), (216.0, 166.0, 23.1), (100.0, 100.0, 0.0),
])
def test_speedup(base, improved, expected):
    assert round(speedup_pct(base, improved), 1) == expected


@pytest.mark.parametrize("base", [0.0, -1.0])
def test_speedup_needs_positive_baseline(base):
    with pytest.raises(ValueError):
        speedup_pct(base, 1.0)


def test_schedule_alternates():
    order = schedule(("naive", "indexed"), 5)
    modes = [m for m, _ in order]
    assert modes == ["naive", "indexed"] * 5
    assert modes.count("naive") == modes.count("indexed")
    assert all(a != b for a, b in zip(modes, modes[1:]))


def test_config_validation():
    with pytest.raises(ValueError):
        BenchConfig("f", reps=0)
    with pytest.raises(ValueError):
        BenchConfig("f", modes=("naive", "turbo"))


@pytest.fixture(scope="module")
def small_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("bench") / "n2.nxp"
    path.write_bytes(ensemble_bytes(2, events=200))
    return str(path)


@pytest.fixture(scope="module")
def report(small_file):
    return run_benchmark(BenchConfig(small_file, reps=3, warmup=1))


def test_one_rep(small_file):
    r = run_benchmark(BenchConfig(small_file, reps=1, warmup=0))
    assert [len(m.samples) for m in r.modes.values()] == [1, 1]
    assert r.speedup_pct is not None
    text = io.StringIO()
    emit_report(r, "csv", text)
    raw, summary = parse_report_csv(text.getvalue())
    assert len(raw) == 2 and len(summary) == 2


def test_report_shape(report):
    assert set(report.modes) == {"naive", "indexed"}
    for result in report.modes.values():
        assert len(result.samples) == 3
        assert all(s.wall_ms > 0 for s in result.samples)
    assert report.modes["indexed"].samples[0].entries_visited == 30 + 2 * 1097
    assert report.speedup_pct == speedup_pct(report.stats["naive"].median, report.stats["indexed"].median)


def test_csv_recompute(report, tmp_path):
    path = tmp_path / "r.csv"
    n = emit_report(report, "csv", path)
    text = path.read_text()
    assert n == len(text.encode())
    raw, summary = parse_report_csv(text)
    assert list(raw[0]) == ["mode", "rep", "wall_ms", "phase_index_ms", "phase_meta_ms",
                            "phase_event_ms", "entries_visited", "buffer_allocations"]
    assert list(summary[0]) == ["mode", "median_ms", "stddev_ms", "q1_ms", "q3_ms", "min_ms", "max_ms", "speedup_pct"]
    for row in summary:
        samples = [float(r["wall_ms"]) for r in raw if r["mode"] == row["mode"]]
        st_ = compute_stats(samples)
        assert float(row["median_ms"]) == st_.median == report.stats[row["mode"]].median
        assert float(row["stddev_ms"]) == st_.stddev
        assert (float(row["q1_ms"]), float(row["q3_ms"])) == (st_.q1, st_.q3)
        assert (float(row["min_ms"]), float(row["max_ms"])) == (st_.min, st_.max)
    by_mode = {row["mode"]: row for row in summary}
    assert by_mode["naive"]["speedup_pct"] == ""
    assert float(by_mode["indexed"]["speedup_pct"]) == report.speedup_pct


def test_json_round_trip(report):
    buf = io.StringIO()
    emit_report(report, "json", buf)
    data = json.loads(buf.getvalue())
    back = BenchReport.from_dict(data)
    assert back == report
    assert back.to_dict() == data


def test_unknown_format(report):
    with pytest.raises(ValueError):
        emit_report(report, "xml", io.StringIO())


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        run_benchmark(BenchConfig(str(tmp_path / "nope.nxp")))

"""
Repeated wall-clock benchmarking of the two loaders.

Runs are interleaved (naive, indexed, naive, indexed, ...) so that slow
drift of a shared machine lands on both modes alike. Medians are the
headline statistic; the raw samples are kept so every summary value can be
recomputed from an emitted report.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .loader import LOADERS
from .schema import validate_schema
from .container import read_tree

BASELINE = "naive"
IMPROVED = "indexed"
RAW_COLUMNS = (
    "mode", "rep", "wall_ms", "phase_index_ms", "phase_meta_ms", "phase_event_ms",
    "entries_visited", "buffer_allocations",
)
SUMMARY_COLUMNS = ("mode", "median_ms", "stddev_ms", "q1_ms", "q3_ms", "min_ms", "max_ms", "speedup_pct")


@dataclass
class BenchConfig:
    file: str
    reps: int = 25
    warmup: int = 3
    modes: tuple[str, ...] = (BASELINE, IMPROVED)

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.warmup < 0:
            raise ValueError("warmup must be >= 0")
        unknown = set(self.modes) - set(LOADERS)
        if unknown or not self.modes or len(set(self.modes)) != len(self.modes):
            raise ValueError(f"modes must be distinct values from {sorted(LOADERS)}")


@dataclass
class Stats:
    n: int
    median: float
    stddev: float
    min: float
    q1: float
    q3: float
    max: float
    hist_counts: list[int]
    hist_edges: list[float]

    @property
    def five_number(self) -> tuple[float, float, float, float, float]:
        return (self.min, self.q1, self.median, self.q3, self.max)


@dataclass
class Sample:
    wall_ms: float
    phase_ms: dict[str, float]
    entries_visited: int
    buffer_allocations: int


@dataclass
class ModeResult:
    samples: list[Sample] = field(default_factory=list)

    @property
    def wall_ms(self) -> list[float]:
        return [s.wall_ms for s in self.samples]


@dataclass
class BenchReport:
    file: str
    reps: int
    warmup: int
    modes: dict[str, ModeResult]
    stats: dict[str, Stats] = field(default_factory=dict)
    speedup_pct: float | None = None

    def finalize(self) -> "BenchReport":
        self.stats = {m: compute_stats(r.wall_ms) for m, r in self.modes.items()}
        if BASELINE in self.stats and IMPROVED in self.stats:
            self.speedup_pct = speedup_pct(self.stats[BASELINE].median, self.stats[IMPROVED].median)
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "BenchReport":
        modes = {
            m: ModeResult([Sample(**s) for s in r["samples"]])
            for m, r in data["modes"].items()
        }
        stats = {m: Stats(**s) for m, s in data.get("stats", {}).items()}
        return cls(data["file"], data["reps"], data["warmup"], modes, stats, data.get("speedup_pct"))


def compute_stats(samples) -> Stats:
    """Median, sample stddev, five-number summary and histogram.

    Quartiles use linear interpolation between order statistics. The
    histogram has ``ceil(sqrt(n))`` equal-width bins over ``[min, max]``.
    """
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = len(x)
    if n == 0:
        raise ValueError("cannot summarize an empty sample")
    mid = n // 2
    median = float(x[mid]) if n % 2 else float((x[mid - 1] + x[mid]) / 2)
    stddev = float(np.std(x, ddof=1)) if n > 1 else 0.0
    q1, q3 = (float(q) for q in np.percentile(x, [25, 75]))
    counts, edges = np.histogram(x, bins=math.ceil(math.sqrt(n)), range=(x[0], x[-1]))
    return Stats(
        n=n, median=median, stddev=stddev, min=float(x[0]), q1=q1, q3=q3,
        max=float(x[-1]), hist_counts=counts.tolist(), hist_edges=edges.tolist(),
    )


def speedup_pct(baseline_median: float, improved_median: float) -> float:
    if not baseline_median > 0:
        raise ValueError("baseline median must be positive")
    return 100.0 * (baseline_median - improved_median) / baseline_median


def schedule(modes, reps: int) -> list[tuple[str, int]]:
    """Strictly alternating ``(mode, rep)`` run order."""
    return [(mode, rep) for rep in range(reps) for mode in modes]


def _run_once(loader, path) -> Sample:
    t0 = time.perf_counter_ns()
    _ws, inst = loader(path)
    wall = (time.perf_counter_ns() - t0) / 1e6
    return Sample(wall, dict(inst.phase_ms), inst.entries_visited, inst.buffer_allocations)


def run_benchmark(cfg: BenchConfig, progress=None) -> BenchReport:
    """Warm up, then time ``cfg.reps`` interleaved cold loads per mode."""
    if not os.path.isfile(cfg.file):
        raise FileNotFoundError(cfg.file)
    violations = validate_schema(read_tree(cfg.file))
    if violations:
        raise ValueError(f"{cfg.file} does not match the ensemble schema: {violations[0]}")

    for _ in range(cfg.warmup):
        for mode in cfg.modes:
            LOADERS[mode](cfg.file)
    results = {mode: ModeResult() for mode in cfg.modes}
    for mode, rep in schedule(cfg.modes, cfg.reps):
        results[mode].samples.append(_run_once(LOADERS[mode], cfg.file))
        if progress is not None:
            progress(mode, rep, results[mode].samples[-1].wall_ms)
    return BenchReport(cfg.file, cfg.reps, cfg.warmup, results).finalize()


def _fmt(value) -> str:
    # repr keeps floats exact through a CSV round trip
    return repr(float(value)) if isinstance(value, float) else str(value)


def report_csv(r: BenchReport) -> str:
    """Raw table, a blank line, then the summary table."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RAW_COLUMNS)
    for mode, result in r.modes.items():
        for rep, s in enumerate(result.samples):
            w.writerow([
                mode, rep, _fmt(s.wall_ms), _fmt(s.phase_ms["index_build"]),
                _fmt(s.phase_ms["metadata_read"]), _fmt(s.phase_ms["event_read"]),
                s.entries_visited, s.buffer_allocations,
            ])
    buf.write("\n")
    w.writerow(SUMMARY_COLUMNS)
    for mode, st in r.stats.items():
        speedup = _fmt(r.speedup_pct) if mode == IMPROVED and r.speedup_pct is not None else ""
        w.writerow([mode] + [_fmt(v) for v in (st.median, st.stddev, st.q1, st.q3, st.min, st.max)] + [speedup])
    return buf.getvalue()


def parse_report_csv(text: str) -> tuple[list[dict], list[dict]]:
    """Split an emitted CSV back into raw and summary rows."""
    raw_text, summary_text = text.split("\n\n", 1)
    return list(csv.DictReader(io.StringIO(raw_text))), list(csv.DictReader(io.StringIO(summary_text)))


def emit_report(r: BenchReport, fmt: str, destination) -> int:
    """Write ``r`` as ``csv`` or ``json`` to a path or text stream; returns bytes written."""
    if fmt == "csv":
        text = report_csv(r)
    elif fmt == "json":
        text = json.dumps(r.to_dict(), indent=2) + "\n"
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "w", newline="") as f:
            f.write(text)
    else:
        destination.write(text)
    return len(text.encode("utf-8"))

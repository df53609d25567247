"""
Loading ensemble files into an in-memory workspace.

Two loaders produce identical workspaces:

``load_naive``
    Rebuilds its picture of the file from the root once per experiment and
    allocates a fresh buffer for every dataset it reads.

``load_indexed``
    Builds the class-keyed :class:`~mdensemble.index.MetadataIndex` once,
    resolves each experiment with prefix range scans, and copies all of an
    experiment's datasets into one pre-sized arena.

Both report a :class:`LoadInstrumentation` so the difference is visible in
counters as well as in wall-clock time.
"""
from __future__ import annotations

import hashlib
import os
import re
import time
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Union

import numpy as np

from .container import (
    NUMPY_DTYPES, AccessCounters, Node, SchemaError, join_path, list_children,
    read_dataset, read_tree,
)
from .index import build_index
from .schema import DIM_NAMES, ROOT, SDS

EVENT_PATH = f"{ROOT}/event_data/event_data"
BOX_PATH = f"{ROOT}/box_structure"
HEADER_DATASETS = ("coordinate_system", "dimensions")
EXPERIMENT_SECTIONS = ("instrument", "sample", "goniometer")
_EXPERIMENT = re.compile(r"experiment(0|[1-9][0-9]*)\Z")
_ARENA_ALIGN = 8

Value = Union[np.ndarray, str]
Source = Union[Node, bytes, str, os.PathLike]


@dataclass(frozen=True)
class ExperimentInfo:
    index: int
    logs: Mapping[str, tuple[np.ndarray, np.ndarray]]
    sample: Mapping[str, Value]
    instrument: Mapping[str, Value]
    goniometer: Mapping[str, Value]

    def __post_init__(self):
        for name, (values, times) in self.logs.items():
            if values.shape != times.shape:
                raise SchemaError(f"log {name!r}: value/time lengths differ")


@dataclass(frozen=True)
class MDWorkspace:
    """A loaded ensemble.

    ``events`` is an ``(n, 8)`` float32 table with columns signal, errorSq,
    runIndex, detectorId, Qx, Qy, Qz (inverse angstrom) and E (meV).
    """

    coordinate_system: int
    dimensions: np.ndarray
    events: np.ndarray
    box_structure: Mapping[str, np.ndarray]
    experiments: tuple[ExperimentInfo, ...]
    dim_names: tuple[str, ...] = DIM_NAMES

    def __post_init__(self):
        if self.events.ndim != 2 or self.events.shape[1] != 8:
            raise SchemaError(f"event table must have 8 columns, got shape {self.events.shape}")
        if len(self.events):
            if not np.all(np.isfinite(self.signal)):
                raise SchemaError("non-finite event signal")
            if self.run_index.max() >= len(self.experiments) or self.run_index.min() < 0:
                raise SchemaError("event run index outside experiment range")

    @property
    def n_dims(self) -> int:
        return len(self.dim_names)

    @property
    def n_events(self) -> int:
        return len(self.events)

    @property
    def signal(self) -> np.ndarray:
        return self.events[:, 0]

    @property
    def error_sq(self) -> np.ndarray:
        return self.events[:, 1]

    @property
    def run_index(self) -> np.ndarray:
        return self.events[:, 2].astype(np.int64)

    @property
    def detector_id(self) -> np.ndarray:
        return self.events[:, 3].astype(np.int64)

    @property
    def coords(self) -> np.ndarray:
        return self.events[:, 4:8]


@dataclass
class LoadInstrumentation:
    entries_visited: int = 0
    buffer_allocations: int = 0
    bytes_read: int = 0
    open_ms: float = 0.0
    phase_ms: dict[str, float] = field(
        default_factory=lambda: {"index_build": 0.0, "metadata_read": 0.0, "event_read": 0.0}
    )


def _open(source: Source) -> Node:
    return source if isinstance(source, Node) else read_tree(source)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _to_value(dtype: str, dims, buf) -> Value:
    """Typed view over ``buf``; text datasets become ``str``."""
    if dtype == "bytes":
        return bytes(buf).decode("utf-8")
    return _frozen(np.frombuffer(buf, dtype=NUMPY_DTYPES[dtype]).reshape(dims))


def _assemble_experiment(k: int, values: Mapping[str, Value]) -> ExperimentInfo:
    """Build one ExperimentInfo from experiment-relative dataset paths."""
    sections: dict[str, dict[str, Value]] = {s: {} for s in EXPERIMENT_SECTIONS}
    logs: dict[str, dict[str, Value]] = {}
    for rel in sorted(values):
        parts = rel.split("/")
        if len(parts) == 2 and parts[0] in sections:
            sections[parts[0]][parts[1]] = values[rel]
        elif len(parts) == 3 and parts[0] == "logs":
            logs.setdefault(parts[1], {})[parts[2]] = values[rel]
    log_series = {}
    for name, entry in logs.items():
        if "value" not in entry or "time" not in entry:
            raise SchemaError(f"experiment{k}/logs/{name}: missing value or time")
        log_series[name] = (entry["value"], entry["time"])
    return ExperimentInfo(
        index=k,
        logs=MappingProxyType(log_series),
        sample=MappingProxyType(sections["sample"]),
        instrument=MappingProxyType(sections["instrument"]),
        goniometer=MappingProxyType(sections["goniometer"]),
    )


def _experiment_number(name: str) -> int | None:
    m = _EXPERIMENT.match(name)
    return int(m.group(1)) if m else None


def _check_indices(indices: list[int]) -> int:
    if sorted(indices) != list(range(len(indices))):
        raise SchemaError(f"non-contiguous experiment indices {sorted(indices)}")
    return len(indices)


def _read_events(root: Node, acc: AccessCounters, inst: LoadInstrumentation) -> np.ndarray:
    dtype, dims, payload = read_dataset(root, EVENT_PATH, acc)
    if dtype != "f32" or len(dims) != 2 or dims[1] != 8:
        raise SchemaError(f"{EVENT_PATH}: expected f32 [n, 8], got {dtype} {list(dims)}")
    inst.buffer_allocations += 1
    return _frozen(np.frombuffer(payload, dtype="<f4").reshape(dims).copy())


# -- naive -------------------------------------------------------------------

def _enumerate(root: Node, acc: AccessCounters) -> dict[str, str]:
    """Every node path below the root, via repeated ``list_children`` calls."""
    out: dict[str, str] = {}
    stack = ["/"]
    while stack:
        path = stack.pop()
        for name, kind in list_children(root, path, acc):
            child = join_path(path, name)
            out[child] = kind
            if kind == "group":
                stack.append(child)
    return out


def _read_copy(root: Node, path: str, acc: AccessCounters, inst: LoadInstrumentation) -> Value:
    dtype, dims, payload = read_dataset(root, path, acc)
    buf = bytearray(payload)
    inst.buffer_allocations += 1
    return _to_value(dtype, dims, buf)


def load_naive(source: Source) -> tuple[MDWorkspace, LoadInstrumentation]:
    """Per-experiment rescans from the root, one allocation per dataset."""
    inst = LoadInstrumentation()
    acc = AccessCounters()
    clock = time.perf_counter
    t_open = clock()
    root = _open(source)
    t0 = clock()
    inst.open_ms = (t0 - t_open) * 1e3
    rescan = 0.0

    entries = _enumerate(root, acc)
    rescan += clock() - t0
    if entries.get(ROOT) != "group":
        raise SchemaError(f"{ROOT}: missing group")
    header = {}
    for name in HEADER_DATASETS:
        path = f"{ROOT}/{name}"
        if entries.get(path) != "dataset":
            raise SchemaError(f"{path}: missing dataset")
        header[name] = _read_copy(root, path, acc, inst)
    box_prefix = BOX_PATH + "/"
    box = {
        p[len(box_prefix):]: _read_copy(root, p, acc, inst)
        for p, kind in entries.items()
        if kind == "dataset" and p.startswith(box_prefix)
    }
    top = ROOT + "/"
    indices = [
        i for p, kind in entries.items()
        if kind == "group" and p.startswith(top)
        and (i := _experiment_number(p[len(top):])) is not None
    ]
    n = _check_indices(indices)

    experiments = []
    for k in range(n):
        t = clock()
        entries = _enumerate(root, acc)
        rescan += clock() - t
        exp_path = f"{ROOT}/experiment{k}"
        prefix = exp_path + "/"
        for section in EXPERIMENT_SECTIONS + ("logs",):
            if entries.get(prefix + section) != "group":
                raise SchemaError(f"{prefix}{section}: missing group")
        values = {
            p[len(prefix):]: _read_copy(root, p, acc, inst)
            for p, kind in entries.items()
            if kind == "dataset" and p.startswith(prefix)
        }
        experiments.append(_assemble_experiment(k, values))
    t1 = clock()
    events = _read_events(root, acc, inst)
    t2 = clock()

    inst.phase_ms["index_build"] = rescan * 1e3
    inst.phase_ms["metadata_read"] = (t1 - t0 - rescan) * 1e3
    inst.phase_ms["event_read"] = (t2 - t1) * 1e3
    inst.entries_visited = acc.entries_visited
    inst.bytes_read = acc.bytes_read
    ws = MDWorkspace(
        coordinate_system=int(header["coordinate_system"]),
        dimensions=header["dimensions"],
        events=events,
        box_structure=MappingProxyType(box),
        experiments=tuple(experiments),
    )
    return ws, inst


# -- indexed -----------------------------------------------------------------

def _read_into_arena(root: Node, paths, acc: AccessCounters, inst: LoadInstrumentation) -> dict[str, Value]:
    """Read ``paths`` into one pre-sized buffer and return views into it."""
    records = [(p, *read_dataset(root, p, acc)) for p in paths]
    offsets = []
    size = 0
    for _p, _dtype, _dims, payload in records:
        offsets.append(size)
        size += -(-len(payload) // _ARENA_ALIGN) * _ARENA_ALIGN
    arena = np.empty(size, dtype=np.uint8)
    inst.buffer_allocations += 1
    for off, (_p, _dtype, _dims, payload) in zip(offsets, records):
        arena[off:off + len(payload)] = np.frombuffer(payload, dtype=np.uint8)
    arena.flags.writeable = False
    return {
        p: _to_value(dtype, dims, arena[off:off + len(payload)])
        for off, (p, dtype, dims, payload) in zip(offsets, records)
    }


def load_indexed(source: Source) -> tuple[MDWorkspace, LoadInstrumentation]:
    """Index once, range-scan per experiment, one arena per experiment."""
    inst = LoadInstrumentation()
    acc = AccessCounters()
    clock = time.perf_counter
    t_open = clock()
    root = _open(source)
    t0 = clock()
    inst.open_ms = (t0 - t_open) * 1e3

    ix = build_index(root, acc)
    t1 = clock()

    if ROOT not in ix.lookup_class("NXentry"):
        raise SchemaError(f"{ROOT}: missing group")
    header_paths = [f"{ROOT}/{name}" for name in HEADER_DATASETS]
    sds_top = set(ix.lookup_prefix(SDS, ROOT))
    for path in header_paths:
        if path not in sds_top:
            raise SchemaError(f"{path}: missing dataset")
    box_paths = ix.lookup_prefix(SDS, BOX_PATH)
    fixed = _read_into_arena(root, header_paths + list(box_paths), acc, inst)
    box = {p[len(BOX_PATH) + 1:]: fixed[p] for p in box_paths}

    top = ROOT + "/"
    indices = []
    for p in ix.lookup_prefix("NXgroup", ROOT):
        rest = p[len(top):]
        if "/" not in rest and (i := _experiment_number(rest)) is not None:
            indices.append(i)
    n = _check_indices(indices)

    group_paths = {
        section: set(ix.lookup_class(nx_class))
        for section, nx_class in (
            ("instrument", "NXinstrument"), ("sample", "NXdata"),
            ("goniometer", "NXpositioner"), ("logs", "NXgroup"),
        )
    }
    experiments = []
    for k in range(n):
        exp_path = f"{ROOT}/experiment{k}"
        prefix = exp_path + "/"
        for section, paths in group_paths.items():
            if prefix + section not in paths:
                raise SchemaError(f"{prefix}{section}: missing group")
        values = _read_into_arena(root, ix.lookup_prefix(SDS, exp_path), acc, inst)
        experiments.append(_assemble_experiment(k, {p[len(prefix):]: v for p, v in values.items()}))
    t2 = clock()
    events = _read_events(root, acc, inst)
    t3 = clock()

    inst.phase_ms["index_build"] = (t1 - t0) * 1e3
    inst.phase_ms["metadata_read"] = (t2 - t1) * 1e3
    inst.phase_ms["event_read"] = (t3 - t2) * 1e3
    inst.entries_visited = acc.entries_visited
    inst.bytes_read = acc.bytes_read
    ws = MDWorkspace(
        coordinate_system=int(fixed[header_paths[0]]),
        dimensions=fixed[header_paths[1]],
        events=events,
        box_structure=MappingProxyType(box),
        experiments=tuple(experiments),
    )
    return ws, inst


LOADERS = {"naive": load_naive, "indexed": load_indexed}


def load(source: Source, mode: str = "indexed") -> tuple[MDWorkspace, LoadInstrumentation]:
    try:
        loader = LOADERS[mode]
    except KeyError:
        raise ValueError(f"unknown load mode {mode!r}; expected one of {sorted(LOADERS)}") from None
    return loader(source)


# -- digest and slicing -----------------------------------------------------------

def _hash_value(h, value: Value) -> None:
    if isinstance(value, str):
        raw = value.encode("utf-8")
        h.update(b"s%d:" % len(raw) + raw)
    else:
        arr = np.asarray(value)
        h.update(f"a{arr.dtype.str}{arr.shape}:".encode())
        h.update(np.ascontiguousarray(arr).tobytes())


def workspace_digest(ws: MDWorkspace) -> str:
    """SHA-256 over experiments by index, logs and bundles by name, events by row."""
    h = hashlib.sha256()
    h.update(b"cs%d" % ws.coordinate_system)
    _hash_value(h, ws.dimensions)
    _hash_value(h, ws.events)
    for name in sorted(ws.box_structure):
        h.update(b"box:" + name.encode())
        _hash_value(h, ws.box_structure[name])
    h.update(b"n%d" % len(ws.experiments))
    for exp in sorted(ws.experiments, key=lambda e: e.index):
        h.update(b"exp%d" % exp.index)
        for name in sorted(exp.logs):
            values, times = exp.logs[name]
            h.update(b"log:" + name.encode())
            _hash_value(h, values)
            _hash_value(h, times)
        for section in EXPERIMENT_SECTIONS:
            bundle = getattr(exp, section)
            for name in sorted(bundle):
                h.update(f"{section}:{name}".encode())
                _hash_value(h, bundle[name])
    return h.hexdigest()


def bin_edges(lo: float, hi: float, n: int) -> np.ndarray:
    return np.linspace(lo, hi, n + 1)


def slice_2d(ws: MDWorkspace, dim_x: int, dim_y: int, bins, ranges) -> np.ndarray:
    """Sum event signal on a regular ``(nx, ny)`` grid over two dimensions.

    Bins are half-open ``[lo, hi)`` except the last, which is closed. The
    result is indexed ``grid[ix, iy]``. Each bin accumulates in float64 in
    event-row order, so the result does not depend on the numpy build.
    """
    nx, ny = (int(b) for b in bins)
    (x0, x1), (y0, y1) = ((float(a), float(b)) for a, b in ranges)
    ndim = ws.n_dims
    if dim_x == dim_y or not (0 <= dim_x < ndim and 0 <= dim_y < ndim):
        raise ValueError(f"need two distinct dimensions in [0, {ndim}), got {dim_x}, {dim_y}")
    if nx < 1 or ny < 1:
        raise ValueError("bin counts must be at least 1")
    if not (x0 < x1 and y0 < y1):
        raise ValueError("ranges need lo < hi")

    x = ws.coords[:, dim_x].astype(np.float64)
    y = ws.coords[:, dim_y].astype(np.float64)
    ix = _bin_index(x, bin_edges(x0, x1, nx))
    iy = _bin_index(y, bin_edges(y0, y1, ny))
    keep = (ix >= 0) & (iy >= 0)
    flat = ix[keep] * ny + iy[keep]
    weights = ws.signal[keep].astype(np.float64)
    # bincount accumulates sequentially in input order
    grid = np.bincount(flat, weights=weights, minlength=nx * ny)
    return grid.reshape(nx, ny)


def _bin_index(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Bin number per value, -1 outside ``[edges[0], edges[-1]]``."""
    n = len(edges) - 1
    idx = np.searchsorted(edges, values, side="right") - 1
    idx[values == edges[-1]] = n - 1
    idx[(values < edges[0]) | (values > edges[-1]) | np.isnan(values)] = -1
    return idx

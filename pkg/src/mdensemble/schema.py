"""
Synthetic multidimensional event-workspace ensembles.

Layout produced by :func:`generate_ensemble`::

    /MDEventWorkspace                      NXentry
        coordinate_system                  i64 scalar
        dimensions                         i64 [4]
        box_structure/                     NXdata, 8 datasets
        event_data/event_data              NXdata, f32 [n_events, 8]
        process/                           NXgroup, 11 datasets
        experiment{k}/                     NXgroup
            instrument/                    NXinstrument
            sample/                        NXdata
            goniometer/                    NXpositioner
            logs/<name>/{value,time}       NXgroup / NXlog

Every group carries exactly one ``NX_class`` attribute and datasets carry
none. At default sizes one experiment adds 1097 entries on top of a fixed
30, which is what makes ``count_entries`` exactly affine in the number of
experiments.
"""
from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .container import Node, iter_entries

ROOT = "/MDEventWorkspace"
DIM_NAMES = ("Qx", "Qy", "Qz", "E")
EVENT_COLUMNS = ("signal", "errorSq", "runIndex", "detectorId", "Qx", "Qy", "Qz", "E")
SDS = "SDS"
DEFAULT_GROUP_CLASS = "NXgroup"

BOX_DATASETS = (
    "box_type", "depth", "extents", "inverse_volume",
    "box_children", "box_signal_errorsq", "box_event_index", "controller",
)
PROCESS_DATASETS = tuple(f"MDWorkspace_history_{i:02d}" for i in range(11))
INSTRUMENT_NAMES = (
    "name", "source_name", "Ei", "Efixed", "fermi_frequency", "t0_frequency",
    "moderator_sample_distance", "sample_detector_distance", "chopper_phase",
    "chopper_slit_package", "beam_width", "beam_height", "detector_count",
    "monitor1_distance", "monitor2_distance", "emission_delay",
    "slit_top", "slit_bottom", "slit_left", "slit_right",
)
SAMPLE_NAMES = (
    "name", "a", "b", "c", "alpha", "beta", "gamma", "u_vector", "v_vector",
    "mass", "temperature", "thickness", "height", "width", "shape",
    "material_formula", "number_density",
)
GONIOMETER_NAMES = ("psi", "rotation_axis")
# first few log names mimic real run logs, the rest are numbered
_KNOWN_LOGS = (
    "gd_prtn_chrg", "proton_charge", "run_title", "SampleTemp", "Ei_log",
    "omega", "phi", "chi", "s1", "s2", "duration", "frequency",
)
DETECTOR_PIXELS = 117_760
EXPERIMENT_RE = re.compile(r"experiment(0|[1-9][0-9]*)\Z")


@dataclass
class EnsembleConfig:
    n_experiments: int = 10
    logs_per_experiment: int = 262
    instrument_datasets: int = 20
    sample_entries: int = 17
    goniometer_datasets: int = 2
    events_per_experiment: int = 10_000
    rng_seed: int = 0
    signal_scale: float = 1.0
    q_range: tuple[float, float] = (-8.0, 8.0)
    e_range: tuple[float, float] = (-10.0, 60.0)
    psi_step_deg: float = 2.0
    log_samples: int = 4

    def validate(self) -> None:
        counts = (
            "n_experiments", "logs_per_experiment", "instrument_datasets",
            "sample_entries", "goniometer_datasets", "events_per_experiment",
            "log_samples",
        )
        for name in counts:
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {value!r}")
        if not self.signal_scale > 0:
            raise ValueError("signal_scale must be positive")
        for lo, hi in (self.q_range, self.e_range):
            if not lo < hi:
                raise ValueError("coordinate ranges need lo < hi")
        if self.n_experiments * self.events_per_experiment >= 2**24:
            # runIndex/detectorId live in f32 columns
            raise ValueError("too many events for exact f32 indices")

    def entries_per_experiment(self) -> int:
        fixed = 2 + 3 * 2 + 2  # experiment, instrument/sample/goniometer, logs (group + attr each)
        return (
            fixed
            + self.instrument_datasets
            + self.sample_entries
            + self.goniometer_datasets
            + 4 * self.logs_per_experiment
        )


FIXED_ENTRIES = 2 + 1 + 1 + (2 + len(BOX_DATASETS)) + (2 + 1) + (2 + len(PROCESS_DATASETS))


@dataclass
class EntryCensus:
    groups: int = 0
    datasets: int = 0
    attributes: int = 0
    per_class: dict[str, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return self.groups + self.datasets + self.attributes


def _names(base: tuple[str, ...], n: int, prefix: str) -> list[str]:
    names = list(base[:n])
    names += [f"{prefix}_{i:03d}" for i in range(len(names), n)]
    return names


def log_names(n: int) -> list[str]:
    return _names(_KNOWN_LOGS, n, "log")


def _group(name: str, nx_class: str) -> Node:
    return Node.group(name, {"NX_class": nx_class})


def _text(name: str, text: str) -> Node:
    return Node.dataset(name, "bytes", [len(text.encode())], text.encode())


def _events(cfg: EnsembleConfig, k: int, rng: np.random.Generator) -> np.ndarray:
    m = cfg.events_per_experiment
    ev = np.empty((m, 8), dtype=np.float32)
    q_lo, q_hi = cfg.q_range
    e_lo, e_hi = cfg.e_range
    # draw in the sample frame, rotate about the vertical axis by psi
    q = rng.uniform(q_lo, q_hi, size=(m, 3))
    psi = np.deg2rad(cfg.psi_step_deg * k)
    c, s = np.cos(psi), np.sin(psi)
    qx = c * q[:, 0] + s * q[:, 2]
    qz = -s * q[:, 0] + c * q[:, 2]
    qx = np.clip(qx, q_lo, q_hi)
    qz = np.clip(qz, q_lo, q_hi)
    energy = rng.uniform(e_lo, e_hi, size=m)
    qmod = np.sqrt(q[:, 0] ** 2 + q[:, 1] ** 2 + q[:, 2] ** 2)
    dispersion = 40.0 * np.sin(0.5 * qmod) ** 2
    signal = cfg.signal_scale * (0.25 + np.exp(-((energy - dispersion) ** 2) / 18.0))
    ev[:, 0] = signal
    ev[:, 1] = signal
    ev[:, 2] = k
    ev[:, 3] = rng.integers(0, DETECTOR_PIXELS, size=m)
    ev[:, 4] = qx
    ev[:, 5] = q[:, 1]
    ev[:, 6] = qz
    ev[:, 7] = energy
    return ev


def _box_structure(cfg: EnsembleConfig, events: np.ndarray) -> tuple[Node, np.ndarray]:
    """Root box split once along every dimension; sorts events by leaf box."""
    lo = np.array([cfg.q_range[0]] * 3 + [cfg.e_range[0]])
    hi = np.array([cfg.q_range[1]] * 3 + [cfg.e_range[1]])
    mid = 0.5 * (lo + hi)
    nleaf = 16
    coords = events[:, 4:8].astype(np.float64)
    bits = (coords >= mid).astype(np.int64)
    leaf = bits @ np.array([8, 4, 2, 1])
    order = np.argsort(leaf, kind="stable")
    events = events[order]
    leaf = leaf[order]
    counts = np.bincount(leaf, minlength=nleaf)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])

    nbox = nleaf + 1
    extents = np.empty((nbox, 8))
    extents[0, 0::2], extents[0, 1::2] = lo, hi
    for b in range(nleaf):
        upper = np.array([(b >> (3 - d)) & 1 for d in range(4)], dtype=bool)
        extents[b + 1, 0::2] = np.where(upper, mid, lo)
        extents[b + 1, 1::2] = np.where(upper, hi, mid)
    widths = extents[:, 1::2] - extents[:, 0::2]
    sig = events[:, 0].astype(np.float64)
    err = events[:, 1].astype(np.float64)
    leaf_sig = np.bincount(leaf, weights=sig, minlength=nleaf)
    leaf_err = np.bincount(leaf, weights=err, minlength=nleaf)
    signal_err = np.vstack([[leaf_sig.sum(), leaf_err.sum()], np.column_stack([leaf_sig, leaf_err])])

    group = _group("box_structure", "NXdata")
    group.add(Node.from_array("box_type", [2] + [1] * nleaf, "i32"))
    group.add(Node.from_array("depth", [0] + [1] * nleaf, "i32"))
    group.add(Node.from_array("extents", extents, "f64"))
    group.add(Node.from_array("inverse_volume", 1.0 / np.prod(widths, axis=1), "f64"))
    group.add(Node.from_array("box_children", [[1, nleaf]] + [[0, 0]] * nleaf, "i32"))
    group.add(Node.from_array("box_signal_errorsq", signal_err, "f64"))
    index = np.vstack([[0, len(events)], np.column_stack([starts, counts])])
    group.add(Node.from_array("box_event_index", index, "i64"))
    controller = {"split_into": [2, 2, 2, 2], "max_depth": 1, "split_threshold": 1000}
    group.add(_text("controller", json.dumps(controller, sort_keys=True)))
    return group, events


def _experiment(cfg: EnsembleConfig, k: int, rng: np.random.Generator) -> Node:
    exp = _group(f"experiment{k}", "NXgroup")

    inst = exp.add(_group("instrument", "NXinstrument"))
    for i, name in enumerate(_names(INSTRUMENT_NAMES, cfg.instrument_datasets, "instrument")):
        if i == 0:
            inst.add(_text(name, "ARCS"))
        else:
            inst.add(Node.from_array(name, rng.uniform(0.0, 100.0), "f64"))

    sample = exp.add(_group("sample", "NXdata"))
    for i, name in enumerate(_names(SAMPLE_NAMES, cfg.sample_entries, "sample")):
        if name in ("name", "material_formula"):
            sample.add(_text(name, "Fe2O3" if name == "material_formula" else "synthetic crystal"))
        elif name in ("u_vector", "v_vector"):
            sample.add(Node.from_array(name, [1.0, 0.0, 0.0] if name == "u_vector" else [0.0, 1.0, 0.0], "f64"))
        elif name == "shape":
            sample.add(Node.from_array(name, 1, "i32"))
        else:
            sample.add(Node.from_array(name, rng.uniform(1.0, 10.0), "f64"))

    gonio = exp.add(_group("goniometer", "NXpositioner"))
    for i, name in enumerate(_names(GONIOMETER_NAMES, cfg.goniometer_datasets, "goniometer")):
        if name == "psi":
            gonio.add(Node.from_array(name, cfg.psi_step_deg * k, "f64"))
        elif name == "rotation_axis":
            gonio.add(Node.from_array(name, [0.0, 1.0, 0.0], "f64"))
        else:
            gonio.add(Node.from_array(name, rng.uniform(-1.0, 1.0), "f64"))

    logs = exp.add(_group("logs", "NXgroup"))
    names = log_names(cfg.logs_per_experiment)
    m = cfg.log_samples
    values = rng.normal(size=(len(names), m))
    times = np.cumsum(rng.uniform(0.5, 1.5, size=(len(names), m)), axis=1)
    for i, name in enumerate(names):
        log = logs.add(_group(name, "NXlog"))
        log.add(Node.from_array("value", values[i], "f64"))
        log.add(Node.from_array("time", times[i], "f64"))
    return exp


def generate_ensemble(cfg: EnsembleConfig) -> Node:
    """Build a deterministic ensemble tree for ``cfg``."""
    cfg.validate()
    seq = np.random.SeedSequence(cfg.rng_seed)
    child_seeds = seq.spawn(cfg.n_experiments + 1)
    fixed_rng = np.random.default_rng(child_seeds[0])
    rngs = [np.random.default_rng(s) for s in child_seeds[1:]]

    events = [_events(cfg, k, rngs[k]) for k in range(cfg.n_experiments)]
    events = np.concatenate(events) if events else np.empty((0, 8), dtype=np.float32)

    root = Node.group("")
    ws = root.add(_group("MDEventWorkspace", "NXentry"))
    ws.add(Node.from_array("coordinate_system", 2, "i64"))  # QSample
    ws.add(Node.from_array("dimensions", [50, 50, 50, 70], "i64"))
    boxes, events = _box_structure(cfg, events)
    ws.add(boxes)
    ev_group = ws.add(_group("event_data", "NXdata"))
    ev_group.add(Node.from_array("event_data", events, "f32"))
    process = ws.add(_group("process", "NXgroup"))
    for i, name in enumerate(PROCESS_DATASETS):
        # fixed-width fields keep record sizes independent of the seed
        record = {"algorithm": f"Step{i:02d}", "version": 1, "seed": f"{int(fixed_rng.integers(0, 2**31)):010d}"}
        process.add(_text(name, json.dumps(record, sort_keys=True)))
    for k in range(cfg.n_experiments):
        ws.add(_experiment(cfg, k, rngs[k]))
    return root


def count_entries(root: Node) -> EntryCensus:
    """Census of every group, dataset and attribute by full traversal.

    The root group itself is not an entry; its attributes are.
    """
    census = EntryCensus()
    per_class: Counter = Counter()
    for _path, kind, obj in iter_entries(root):
        if kind == "attribute":
            census.attributes += 1
        elif kind == "group":
            census.groups += 1
            per_class[obj.attrs.get("NX_class", DEFAULT_GROUP_CLASS)] += 1
        else:
            census.datasets += 1
            per_class[SDS] += 1
    census.per_class = dict(sorted(per_class.items()))
    return census


def _expect_group(node: Node | None, path: str, nx_class: str, out: list[str]) -> bool:
    if node is None:
        out.append(f"{path}: missing group")
        return False
    if not node.is_group:
        out.append(f"{path}: expected group, found dataset")
        return False
    actual = node.attrs.get("NX_class")
    if actual != nx_class:
        out.append(f"{path}: NX_class is {actual!r}, expected {nx_class!r}")
    return True


def _expect_dataset(node: Node | None, path: str, dtype: str, out: list[str], dims=None) -> bool:
    if node is None:
        out.append(f"{path}: missing dataset")
        return False
    if node.is_group:
        out.append(f"{path}: expected dataset, found group")
        return False
    if node.dtype != dtype:
        out.append(f"{path}: dtype is {node.dtype}, expected {dtype}")
    if dims is not None and node.dims != tuple(dims):
        out.append(f"{path}: dims are {list(node.dims)}, expected {list(dims)}")
    return True


def validate_schema(root: Node) -> list[str]:
    """List of human-readable violations; empty when ``root`` fits the layout."""
    out: list[str] = []
    ws = root.children.get("MDEventWorkspace")
    if not _expect_group(ws, ROOT, "NXentry", out):
        return out
    kids = ws.children
    _expect_dataset(kids.get("coordinate_system"), f"{ROOT}/coordinate_system", "i64", out, ())
    _expect_dataset(kids.get("dimensions"), f"{ROOT}/dimensions", "i64", out, (4,))
    _expect_group(kids.get("box_structure"), f"{ROOT}/box_structure", "NXdata", out)
    _expect_group(kids.get("process"), f"{ROOT}/process", "NXgroup", out)
    if _expect_group(kids.get("event_data"), f"{ROOT}/event_data", "NXdata", out):
        path = f"{ROOT}/event_data/event_data"
        ev = kids["event_data"].children.get("event_data")
        if _expect_dataset(ev, path, "f32", out):
            if len(ev.dims) != 2 or ev.dims[1] != len(EVENT_COLUMNS):
                out.append(f"{path}: expected {len(EVENT_COLUMNS)} event columns, dims are {list(ev.dims)}")

    indices = []
    for name, node in kids.items():
        m = EXPERIMENT_RE.match(name)
        if m:
            indices.append(int(m.group(1)))
            _validate_experiment(node, f"{ROOT}/{name}", out)
    if sorted(indices) != list(range(len(indices))):
        out.append(f"{ROOT}: non-contiguous experiment indices {sorted(indices)}")
    return out


def _validate_experiment(exp: Node, path: str, out: list[str]) -> None:
    if not _expect_group(exp, path, "NXgroup", out):
        return
    for name, nx_class in (
        ("instrument", "NXinstrument"), ("sample", "NXdata"),
        ("goniometer", "NXpositioner"), ("logs", "NXgroup"),
    ):
        sub = exp.children.get(name)
        if not _expect_group(sub, f"{path}/{name}", nx_class, out) or name == "logs":
            continue
        for child in sub.children.values():
            if child.is_group:
                out.append(f"{path}/{name}/{child.name}: expected dataset, found group")
    logs = exp.children.get("logs")
    if logs is None or not logs.is_group:
        return
    for log in logs.children.values():
        lp = f"{path}/logs/{log.name}"
        if not _expect_group(log, lp, "NXlog", out):
            continue
        value = log.children.get("value")
        time = log.children.get("time")
        ok = _expect_dataset(value, f"{lp}/value", "f64", out)
        ok = _expect_dataset(time, f"{lp}/time", "f64", out) and ok
        if ok and value.dims != time.dims:
            out.append(f"{lp}: value and time lengths differ")


__all__ = [
    "DIM_NAMES", "EVENT_COLUMNS", "EnsembleConfig", "EntryCensus", "FIXED_ENTRIES",
    "ROOT", "SDS", "count_entries", "generate_ensemble", "log_names", "validate_schema",
]

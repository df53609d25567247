import functools
import random

import numpy as np
import pytest

from mdensemble.container import DTYPE_CODES, Node, dumps, element_size
from mdensemble.schema import EnsembleConfig, generate_ensemble

GENERATED_N = (0, 1, 2, 5, 10, 40)
# "!" and "." sort before "/", which exercises prefix-range edge cases
NAME_ALPHABET = "abcxyz019_-.!é"
CLASSES = ("NXdata", "NXentry", "NXgroup", "NXlog", "NXinstrument", "NXpositioner")


def random_tree(seed: int, max_depth: int = 4, max_children: int = 5) -> Node:
    """Random valid tree; some groups deliberately lack NX_class."""
    rng = random.Random(seed)
    nrng = np.random.default_rng(seed)

    def name():
        return "".join(rng.choice(NAME_ALPHABET) for _ in range(rng.randint(1, 6)))

    def attrs(nx_class):
        out = {}
        if nx_class:
            out["NX_class"] = rng.choice(CLASSES)
        for _ in range(rng.randint(0, 2)):
            kind = rng.randrange(3)
            if kind == 0:
                value = name() * rng.randint(0, 3)
            elif kind == 1:
                value = rng.randint(-(2**63), 2**63 - 1)
            else:
                value = rng.uniform(-1e9, 1e9)
            out["a" + name()] = value
        return out

    def dataset(nm):
        dtype = rng.choice(sorted(DTYPE_CODES))
        dims = [rng.randint(0, 4) for _ in range(rng.randint(0, 3))]
        n = element_size(dtype) * int(np.prod(dims, dtype=np.int64))
        payload = nrng.integers(0, 256, size=n, dtype=np.uint8).tobytes()
        return Node.dataset(nm, dtype, dims, payload, attrs(False) if rng.random() < 0.2 else None)

    def group(nm, depth):
        node = Node.group(nm, attrs(rng.random() < 0.85))
        for _ in range(rng.randint(0, max_children)):
            child_name = name()
            if child_name in node.children:
                continue
            if depth < max_depth and rng.random() < 0.45:
                node.add(group(child_name, depth + 1))
            else:
                node.add(dataset(child_name))
        return node

    root = group("", 0)
    root.attrs.pop("NX_class", None)
    return root


@functools.lru_cache(maxsize=None)
def ensemble_bytes(n: int, events: int = 10_000, seed: int = 0) -> bytes:
    cfg = EnsembleConfig(n_experiments=n, events_per_experiment=events, rng_seed=seed)
    return dumps(generate_ensemble(cfg))


@pytest.fixture(scope="session")
def ensemble():
    return ensemble_bytes


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion")


_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or report.failed:
        detail = getattr(item, "criterion_detail", "")
        prev = _CRITERIA.get(number)
        passed = report.passed and (prev is None or prev[1])
        _CRITERIA[number] = (title, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed, detail = _CRITERIA[number]
        line = f"[{'PASS' if passed else 'FAIL'}] {number}. {title}"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)

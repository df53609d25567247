import pytest

from mdensemble.container import canonical_digest, dumps, iter_entries, loads, Node
from mdensemble.schema import (
    FIXED_ENTRIES, EnsembleConfig, count_entries, generate_ensemble, validate_schema,
)

from conftest import ensemble_bytes


def traversal_total(root):
    """Independent count: recursive walk over groups, datasets, attributes."""
    def walk(node):
        return sum(1 + len(c.attrs) + walk(c) for c in node.children.values())
    return len(root.attrs) + walk(root)


def test_empty_root():
    c = count_entries(Node.group(""))
    assert (c.total, c.groups, c.datasets, c.attributes) == (0, 0, 0, 0)


def test_default_budget():
    cfg = EnsembleConfig()
    assert cfg.entries_per_experiment() == 1097
    assert FIXED_ENTRIES == 30


@pytest.mark.parametrize("n", [0, 1, 2, 5])
def test_affine_law_matches_traversal(n):
    root = loads(ensemble_bytes(n))
    c = count_entries(root)
    assert c.total == traversal_total(root) == 30 + 1097 * n
    assert c.total == c.groups + c.datasets + c.attributes


def test_fixed_overhead_breakdown():
    c = count_entries(loads(ensemble_bytes(0)))
    # MDEventWorkspace, box_structure, event_data, process
    assert c.groups == 4
    assert c.attributes == 4
    # coordinate_system, dimensions, 8 box datasets, event table, 11 process records
    assert c.datasets == 22
    assert c.per_class == {"NXdata": 2, "NXentry": 1, "NXgroup": 1, "SDS": 22}


@pytest.mark.parametrize("n, total", [(10, 11_000), (40, 43_910)])
def test_reported_entry_counts(n, total):
    assert count_entries(generate_ensemble(EnsembleConfig(n_experiments=n, events_per_experiment=10))).total == total


@pytest.mark.parametrize("n", [1, 2, 10])
def test_sds_is_largest_class(n):
    per_class = count_entries(loads(ensemble_bytes(n))).per_class
    assert per_class["SDS"] == max(per_class.values())
    assert sum(v for k, v in per_class.items() if k != "SDS") < per_class["SDS"]


def test_counts_scale_with_config():
    cfg = EnsembleConfig(n_experiments=3, logs_per_experiment=5, instrument_datasets=2,
                         sample_entries=25, goniometer_datasets=4, events_per_experiment=7)
    root = generate_ensemble(cfg)
    assert count_entries(root).total == FIXED_ENTRIES + 3 * cfg.entries_per_experiment()
    assert validate_schema(root) == []


def test_deterministic():
    cfg = EnsembleConfig(n_experiments=2, events_per_experiment=100, rng_seed=5)
    assert canonical_digest(generate_ensemble(cfg)) == canonical_digest(generate_ensemble(cfg))
    other = EnsembleConfig(n_experiments=2, events_per_experiment=100, rng_seed=6)
    assert canonical_digest(generate_ensemble(other)) != canonical_digest(generate_ensemble(cfg))


def test_serialized_size_is_affine():
    def size(n, seed=1):
        cfg = EnsembleConfig(n_experiments=n, events_per_experiment=20, rng_seed=seed)
        return len(dumps(generate_ensemble(cfg)))

    fixed = size(0)
    per_experiment = size(1) - fixed
    assert size(0, seed=9) == fixed
    for n in (2, 5, 9):
        assert size(n) == fixed + n * per_experiment
    # experiment10 and up carry one more name byte each
    for n in (10, 12):
        assert size(n) == fixed + n * per_experiment + (n - 10)


def test_class_attribute_discipline():
    root = loads(ensemble_bytes(2))
    for path, kind, obj in iter_entries(root):
        if kind == "group":
            assert list(obj.attrs) == ["NX_class"], path
        elif kind == "dataset":
            assert obj.attrs == {}, path


def test_event_table():
    cfg = EnsembleConfig(n_experiments=3, events_per_experiment=500)
    root = generate_ensemble(cfg)
    ev = root.children["MDEventWorkspace"].children["event_data"].children["event_data"].array()
    assert ev.shape == (1500, 8)
    assert (ev[:, 0] > 0).all()
    assert set(ev[:, 2].astype(int)) == {0, 1, 2}
    assert (ev[:, 4:7] >= cfg.q_range[0]).all() and (ev[:, 4:7] <= cfg.q_range[1]).all()
    assert (ev[:, 7] >= cfg.e_range[0]).all() and (ev[:, 7] <= cfg.e_range[1]).all()


@pytest.mark.parametrize("bad", [
    dict(n_experiments=-1), dict(logs_per_experiment=1.5), dict(signal_scale=0.0),
    dict(q_range=(1.0, 1.0)),
])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        generate_ensemble(EnsembleConfig(**bad))


def test_valid_ensemble():
    assert validate_schema(loads(ensemble_bytes(2))) == []


def test_missing_experiment_is_reported():
    root = generate_ensemble(EnsembleConfig(n_experiments=3, events_per_experiment=10))
    del root.children["MDEventWorkspace"].children["experiment1"]
    violations = validate_schema(root)
    assert any("non-contiguous experiment indices" in v for v in violations)


def test_wrong_class_names_path():
    root = generate_ensemble(EnsembleConfig(n_experiments=1, events_per_experiment=10))
    path = "/MDEventWorkspace/experiment0/goniometer"
    root.children["MDEventWorkspace"].children["experiment0"].children["goniometer"].attrs["NX_class"] = "NXdata"
    violations = validate_schema(root)
    assert len(violations) == 1
    assert violations[0].startswith(path)


def test_event_column_count():
    root = generate_ensemble(EnsembleConfig(n_experiments=1, events_per_experiment=10))
    group = root.children["MDEventWorkspace"].children["event_data"]
    group.children["event_data"] = Node.from_array("event_data", [[0.0] * 7], "f32")
    assert any("event columns" in v for v in validate_schema(root))


def test_missing_workspace():
    assert validate_schema(Node.group("")) == ["/MDEventWorkspace: missing group"]


def test_log_length_mismatch():
    root = generate_ensemble(EnsembleConfig(n_experiments=1, events_per_experiment=10))
    log = root.children["MDEventWorkspace"].children["experiment0"].children["logs"].children["gd_prtn_chrg"]
    log.children["time"] = Node.from_array("time", [1.0] * 9, "f64")
    assert any("lengths differ" in v for v in validate_schema(root))

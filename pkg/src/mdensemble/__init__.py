"""Ensemble file schema, cached metadata index and loader benchmarks."""
from .container import (
    AccessCounters, Node, canonical_digest, list_children, read_attr,
    read_dataset, read_tree, write_tree,
)
from .schema import EnsembleConfig, EntryCensus, count_entries, generate_ensemble, validate_schema
from .index import MetadataIndex, build_index, index_stats, lookup_class, lookup_prefix
from .loader import (
    ExperimentInfo, LoadInstrumentation, MDWorkspace, load_indexed, load_naive,
    slice_2d, workspace_digest,
)
from .bench import BenchConfig, BenchReport, compute_stats, emit_report, run_benchmark, speedup_pct

__version__ = "0.1.0"

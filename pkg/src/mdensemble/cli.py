"""Command line entry point: generate, inspect, load, slice, bench."""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import bench, container, loader, schema
from .index import build_index

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _parse_dims(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected two dimensions, e.g. Qx,Qz or 0,2")
    out = []
    for p in parts:
        p = p.strip()
        if p in schema.DIM_NAMES:
            out.append(schema.DIM_NAMES.index(p))
        elif p.isdigit():
            out.append(int(p))
        else:
            raise argparse.ArgumentTypeError(f"unknown dimension {p!r}")
    return out[0], out[1]


def _parse_bins(text: str) -> tuple[int, int]:
    try:
        nx, ny = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected NXxNY, e.g. 100x80") from None
    return nx, ny


def _parse_range(text: str):
    try:
        (x0, x1), (y0, y1) = (tuple(float(v) for v in part.split(":")) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected x0:x1,y0:y1") from None
    return (x0, x1), (y0, y1)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mdensemble", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic ensemble file")
    g.add_argument("--experiments", type=int, required=True)
    g.add_argument("--logs", type=int, default=262)
    g.add_argument("--events", type=int, default=10_000, help="events per experiment")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    i = sub.add_parser("inspect", help="summarize a file")
    i.add_argument("file")
    i.add_argument("--index", action="store_true", help="dump class<TAB>path lines")
    i.add_argument("--census", action="store_true", help="print entry counts")

    ld = sub.add_parser("load", help="load a file into a workspace")
    ld.add_argument("file")
    ld.add_argument("--mode", choices=sorted(loader.LOADERS), default="indexed")
    ld.add_argument("--verify", action="store_true", help="run both loaders and compare digests")

    s = sub.add_parser("slice", help="2D slice of summed signal as CSV")
    s.add_argument("file")
    s.add_argument("--dims", type=_parse_dims, required=True)
    s.add_argument("--bins", type=_parse_bins, required=True)
    s.add_argument("--range", dest="ranges", type=_parse_range, required=True)
    s.add_argument("--out", default="-", help="CSV path, '-' for stdout")

    b = sub.add_parser("bench", help="interleaved wall-clock benchmark")
    b.add_argument("file")
    b.add_argument("--reps", type=int, default=25)
    b.add_argument("--warmup", type=int, default=3)
    b.add_argument("--format", choices=("csv", "json"), help="default: from --out suffix")
    b.add_argument("--out", required=True)
    return p


def _generate(args, out) -> int:
    cfg = schema.EnsembleConfig(
        n_experiments=args.experiments, logs_per_experiment=args.logs,
        events_per_experiment=args.events, rng_seed=args.seed,
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    root = schema.generate_ensemble(cfg)
    nbytes = container.write_tree(root, args.out)
    print(f"wrote {args.out}: {cfg.n_experiments} experiments, {nbytes} bytes", file=out)
    return EXIT_OK


def _inspect(args, out) -> int:
    root = container.read_tree(args.file)
    if args.index:
        out.write(build_index(root).dump())
    if args.census:
        c = schema.count_entries(root)
        print(f"groups {c.groups}", file=out)
        print(f"datasets {c.datasets}", file=out)
        print(f"attributes {c.attributes}", file=out)
        print(f"total {c.total}", file=out)
        for k, v in c.per_class.items():
            print(f"class {k} {v}", file=out)
    if not (args.index or args.census):
        for name, kind in container.list_children(root, "/"):
            print(f"{kind}\t/{name}", file=out)
        violations = schema.validate_schema(root)
        print(f"schema: {'ok' if not violations else f'{len(violations)} violation(s)'}", file=out)
        for v in violations:
            print(f"  {v}", file=out)
    return EXIT_OK


def _load(args, out) -> int:
    root = container.read_tree(args.file)
    violations = schema.validate_schema(root)
    if violations:
        for v in violations:
            print(f"schema violation: {v}", file=sys.stderr)
        return EXIT_FAIL
    modes = list(loader.LOADERS) if args.verify else [args.mode]
    digests = {}
    for mode in modes:
        ws, inst = loader.load(root, mode)
        digests[mode] = loader.workspace_digest(ws)
        print(
            f"{mode}: experiments={len(ws.experiments)} events={ws.n_events} "
            f"entries_visited={inst.entries_visited} buffer_allocations={inst.buffer_allocations} "
            f"digest={digests[mode]}",
            file=out,
        )
    if args.verify:
        if len(set(digests.values())) != 1:
            print("verify: digest mismatch", file=out)
            return EXIT_FAIL
        print("verify: ok", file=out)
    return EXIT_OK


def _slice(args, out) -> int:
    ws, _ = loader.load_indexed(args.file)
    try:
        grid = loader.slice_2d(ws, *args.dims, args.bins, args.ranges)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.out == "-":
        np.savetxt(out, grid, fmt="%.6g", delimiter=",")
    else:
        np.savetxt(args.out, grid, fmt="%.6g", delimiter=",")
    return EXIT_OK


def _bench(args, out) -> int:
    try:
        cfg = bench.BenchConfig(args.file, reps=args.reps, warmup=args.warmup)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    fmt = args.format or ("json" if args.out.endswith(".json") else "csv")
    report = bench.run_benchmark(cfg)
    bench.emit_report(report, fmt, args.out)
    for mode, st in report.stats.items():
        print(f"{mode}: median {st.median:.3f} ms, stddev {st.stddev:.3f} ms (n={st.n})", file=out)
    if report.speedup_pct is not None:
        print(f"speedup {report.speedup_pct:.1f}%", file=out)
    return EXIT_OK


COMMANDS = {"generate": _generate, "inspect": _inspect, "load": _load, "slice": _slice, "bench": _bench}


def cli_main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (OSError, container.ContainerError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main():
    sys.exit(cli_main())

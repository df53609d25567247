"""
Cached metadata index: NX_class -> sorted absolute paths.

Built with one pass over the tree, then queried instead of walking the
hierarchy again. Datasets are filed under ``"SDS"``; groups without an
``NX_class`` attribute fall back to ``"NXgroup"``.
"""
from __future__ import annotations

import bisect
import warnings
from collections import defaultdict
from types import MappingProxyType
from typing import Mapping

from .container import AccessCounters, Node, join_path
from .schema import DEFAULT_GROUP_CLASS, SDS


class MissingClassWarning(UserWarning):
    pass


class MetadataIndex:
    """Immutable class-keyed index of entry paths."""

    def __init__(self, entries: Mapping[str, tuple[str, ...]], entries_visited: int = 0,
                 warnings: tuple[str, ...] = ()):
        self._entries = MappingProxyType({k: tuple(entries[k]) for k in sorted(entries)})
        self.entries_visited = entries_visited
        self.warnings = tuple(warnings)

    @property
    def classes(self) -> tuple[str, ...]:
        return tuple(self._entries)

    def __getitem__(self, nx_class: str) -> tuple[str, ...]:
        return self._entries[nx_class]

    def __contains__(self, nx_class: str) -> bool:
        return nx_class in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def items(self):
        return self._entries.items()

    def lookup_class(self, nx_class: str) -> tuple[str, ...]:
        return self._entries.get(nx_class, ())

    def lookup_prefix(self, nx_class: str, prefix: str) -> tuple[str, ...]:
        """Paths of ``nx_class`` equal to ``prefix`` or below it.

        Two bisections on the sorted paths; ``"0"`` is the code point after
        ``"/"``, so ``[prefix + "/", prefix + "0")`` bounds the subtree.
        """
        paths = self._entries.get(nx_class, ())
        prefix = prefix.rstrip("/")
        if not prefix:
            return paths
        lo = bisect.bisect_left(paths, prefix + "/")
        hi = bisect.bisect_left(paths, prefix + "0", lo)
        i = bisect.bisect_left(paths, prefix)
        own = (prefix,) if i < len(paths) and paths[i] == prefix else ()
        return own + paths[lo:hi]

    def stats(self) -> dict[str, int]:
        """Per-class counts plus ``"total"``."""
        out = {k: len(v) for k, v in self._entries.items()}
        out["total"] = sum(out.values())
        return out

    def dump(self) -> str:
        """One ``class<TAB>path`` line per entry, classes in sorted order."""
        return "".join(f"{k}\t{p}\n" for k, paths in self._entries.items() for p in paths)

    def __eq__(self, other):
        if not isinstance(other, MetadataIndex):
            return NotImplemented
        return dict(self._entries) == dict(other._entries)

    __hash__ = None

    def __repr__(self):
        return f"MetadataIndex({self.stats()})"


def build_index(root: Node, counters: AccessCounters | None = None) -> MetadataIndex:
    """Index every group and dataset below ``root`` in one traversal.

    ``entries_visited`` counts each group, dataset and attribute once, so it
    equals ``count_entries(root).total``.
    """
    buckets: dict[str, list[str]] = defaultdict(list)
    missing: list[str] = []
    visited = len(root.attrs)
    stack = [("", root)]
    while stack:
        path, node = stack.pop()
        for child in node.children.values():
            child_path = join_path(path, child.name)
            visited += 1 + len(child.attrs)
            if child.is_group:
                nx_class = child.attrs.get("NX_class")
                if not isinstance(nx_class, str):
                    nx_class = DEFAULT_GROUP_CLASS
                    missing.append(child_path)
                buckets[nx_class].append(child_path)
                stack.append((child_path, child))
            else:
                buckets[SDS].append(child_path)
    for paths in buckets.values():
        paths.sort()
    if missing:
        warnings.warn(
            f"{len(missing)} group(s) without NX_class indexed as {DEFAULT_GROUP_CLASS}",
            MissingClassWarning, stacklevel=2,
        )
    if counters is not None:
        counters.entries_visited += visited
    return MetadataIndex(buckets, visited, tuple(f"{p}: missing NX_class" for p in missing))


def lookup_class(ix: MetadataIndex, nx_class: str) -> tuple[str, ...]:
    return ix.lookup_class(nx_class)


def lookup_prefix(ix: MetadataIndex, nx_class: str, prefix: str) -> tuple[str, ...]:
    return ix.lookup_prefix(nx_class, prefix)


def index_stats(ix: MetadataIndex) -> dict[str, int]:
    return ix.stats()

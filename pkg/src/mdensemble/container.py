"""
Hierarchical container model and the NXPack binary codec.

A tree is made of :class:`Node` objects. Groups hold ordered children,
datasets hold a typed, row-major payload. Both carry ordered attributes.
Entries are addressed by absolute paths (``/a/b``); attributes are
addressed as ``/a/b@name``.

NXPack layout (little-endian)::

    header   "NXP1" | version u32 | flags u32
    node     kind u8 | name (u16 len + utf-8) | attr-count u16 | attrs...
             group:   child-count u32 | children...
             dataset: dtype u8 | ndim u8 | dims u64[ndim] | payload
    attr     name (u16 len + utf-8) | type u8 | value
             0 text: u32 len + utf-8, 1 i64, 2 f64
"""
from __future__ import annotations

import hashlib
import math
import os
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Iterator, Union

import numpy as np

MAGIC = b"NXP1"
VERSION = 1

AttrValue = Union[str, int, float]

# dtype code -> (name, numpy dtype)
DTYPES = {
    0: ("f32", np.dtype("<f4")),
    1: ("f64", np.dtype("<f8")),
    2: ("i32", np.dtype("<i4")),
    3: ("i64", np.dtype("<i8")),
    4: ("u32", np.dtype("<u4")),
    5: ("bytes", np.dtype("u1")),
}
DTYPE_CODES = {name: code for code, (name, _) in DTYPES.items()}
NUMPY_DTYPES = {name: dt for name, dt in DTYPES.values()}

_I64_MIN, _I64_MAX = -(2**63), 2**63 - 1
_U16_MAX = 2**16 - 1
_U32_MAX = 2**32 - 1

_HEADER = struct.Struct("<4sII")
_U8 = struct.Struct("<B")
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_I64 = struct.Struct("<q")
_F64 = struct.Struct("<d")


class ContainerError(Exception):
    """Base class for container errors."""


class SchemaError(ContainerError, ValueError):
    """A tree violates a structural invariant."""


class ParseError(ContainerError):
    """Malformed NXPack input."""


class BadMagicError(ParseError):
    pass


class UnsupportedVersionError(ParseError):
    pass


class TruncatedError(ParseError):
    pass


class DuplicateNameError(ParseError):
    pass


class PathNotFoundError(ContainerError, LookupError):
    pass


class AttributeNotFoundError(ContainerError, LookupError):
    pass


class NotAGroupError(ContainerError):
    pass


class NotADatasetError(ContainerError):
    pass


@dataclass
class AccessCounters:
    """Per-session instrumentation shared by the access primitives."""

    entries_visited: int = 0
    bytes_read: int = 0


def element_size(dtype: str) -> int:
    return NUMPY_DTYPES[dtype].itemsize


@dataclass(eq=False)
class Node:
    """A group or dataset entry.

    Children are kept in a dict keyed by name, which preserves insertion
    order and makes duplicate names unrepresentable.
    """

    kind: str
    name: str
    attrs: dict[str, AttrValue] = field(default_factory=dict)
    children: dict[str, "Node"] = field(default_factory=dict)
    dtype: str | None = None
    dims: tuple[int, ...] = ()
    payload: bytes = b""

    @classmethod
    def group(cls, name: str, attrs=None, children=()) -> "Node":
        node = cls("group", name, dict(attrs or {}))
        for child in children:
            node.add(child)
        return node

    @classmethod
    def dataset(cls, name: str, dtype: str, dims, payload: bytes, attrs=None) -> "Node":
        return cls("dataset", name, dict(attrs or {}), {}, dtype, tuple(int(d) for d in dims), bytes(payload))

    @classmethod
    def from_array(cls, name: str, array, dtype: str, attrs=None) -> "Node":
        """Dataset from an array-like, converted to ``dtype``'s wire form."""
        arr = np.array(array, dtype=NUMPY_DTYPES[dtype], order="C")
        return cls.dataset(name, dtype, arr.shape, arr.tobytes(), attrs)

    @property
    def is_group(self) -> bool:
        return self.kind == "group"

    def add(self, child: "Node") -> "Node":
        if not self.is_group:
            raise SchemaError(f"dataset {self.name!r} cannot have children")
        if child.name in self.children:
            raise SchemaError(f"duplicate child name {child.name!r} in {self.name!r}")
        self.children[child.name] = child
        return child

    def array(self) -> np.ndarray:
        """Read-only numpy view of a dataset payload."""
        if self.is_group:
            raise NotADatasetError(self.name)
        return np.frombuffer(self.payload, dtype=NUMPY_DTYPES[self.dtype]).reshape(self.dims)

    def __eq__(self, other):
        # order-sensitive, unlike plain dict comparison
        if not isinstance(other, Node):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.name == other.name
            and list(self.attrs.items()) == list(other.attrs.items())
            and self.dtype == other.dtype
            and self.dims == other.dims
            and self.payload == other.payload
            and list(self.children) == list(other.children)
            and all(a == b for a, b in zip(self.children.values(), other.children.values()))
        )

    __hash__ = None


def check_node(node: Node, root: bool = False) -> None:
    """Raise :class:`SchemaError` if ``node`` (not its subtree) is malformed."""
    if node.kind not in ("group", "dataset"):
        raise SchemaError(f"unknown node kind {node.kind!r}")
    if root:
        if node.kind != "group" or node.name != "":
            raise SchemaError("root must be a group with an empty name")
    else:
        _check_name(node.name, "node")
    for key, value in node.attrs.items():
        _check_name(key, "attribute")
        if isinstance(value, bool) or not isinstance(value, (str, int, float)):
            raise SchemaError(f"attribute {key!r} has unsupported type {type(value).__name__}")
        if isinstance(value, int) and not _I64_MIN <= value <= _I64_MAX:
            raise SchemaError(f"attribute {key!r} out of i64 range")
        if isinstance(value, str) and len(value.encode("utf-8")) > _U32_MAX:
            raise SchemaError(f"attribute {key!r} text too long")
    if node.is_group:
        if node.dtype is not None or node.dims or node.payload:
            raise SchemaError(f"group {node.name!r} carries dataset fields")
        return
    if node.children:
        raise SchemaError(f"dataset {node.name!r} has children")
    if node.dtype not in DTYPE_CODES:
        raise SchemaError(f"dataset {node.name!r} has unknown dtype {node.dtype!r}")
    if len(node.dims) > 255 or any(d < 0 for d in node.dims):
        raise SchemaError(f"dataset {node.name!r} has invalid dims {node.dims}")
    expected = element_size(node.dtype) * math.prod(node.dims)
    if len(node.payload) != expected:
        raise SchemaError(
            f"dataset {node.name!r}: payload is {len(node.payload)} bytes, expected {expected}"
        )


def _check_name(name: str, what: str) -> None:
    if not isinstance(name, str) or not name:
        raise SchemaError(f"{what} name must be nonempty text")
    if "/" in name or "@" in name:
        raise SchemaError(f"{what} name {name!r} contains '/' or '@'")
    if len(name.encode("utf-8")) > _U16_MAX:
        raise SchemaError(f"{what} name too long")


# -- encoding ---------------------------------------------------------------

def _put_name(out: bytearray, name: str) -> None:
    raw = name.encode("utf-8")
    out += _U16.pack(len(raw))
    out += raw


def _encode_node(node: Node, out: bytearray, root: bool = False) -> None:
    check_node(node, root)
    out += _U8.pack(0 if node.is_group else 1)
    _put_name(out, node.name)
    out += _U16.pack(len(node.attrs))
    for key, value in node.attrs.items():
        _put_name(out, key)
        if isinstance(value, str):
            raw = value.encode("utf-8")
            out += _U8.pack(0)
            out += _U32.pack(len(raw))
            out += raw
        elif isinstance(value, int):
            out += _U8.pack(1)
            out += _I64.pack(value)
        else:
            out += _U8.pack(2)
            out += _F64.pack(value)
    if node.is_group:
        out += _U32.pack(len(node.children))
        for child in node.children.values():
            _encode_node(child, out)
    else:
        out += _U8.pack(DTYPE_CODES[node.dtype])
        out += _U8.pack(len(node.dims))
        for d in node.dims:
            out += _U64.pack(d)
        out += node.payload


def dumps(root: Node) -> bytes:
    out = bytearray(_HEADER.pack(MAGIC, VERSION, 0))
    _encode_node(root, out, root=True)
    return bytes(out)


def write_tree(root: Node, destination: Union[BinaryIO, str, os.PathLike]) -> int:
    """Serialize ``root`` to a binary sink or path; returns bytes written."""
    data = dumps(root)
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "wb") as f:
            f.write(data)
    else:
        destination.write(data)
    return len(data)


# -- decoding ---------------------------------------------------------------

class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int) -> memoryview:
        end = self.pos + n
        if end > len(self.data):
            raise TruncatedError(f"truncated input: need {n} bytes at offset {self.pos}")
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def unpack(self, st: struct.Struct):
        return st.unpack(self.take(st.size))[0]

    def name(self) -> str:
        raw = self.take(self.unpack(_U16))
        try:
            return str(raw, "utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"invalid utf-8 name at offset {self.pos}") from exc


def _decode_node(r: _Reader) -> Node:
    kind_code = r.unpack(_U8)
    if kind_code not in (0, 1):
        raise ParseError(f"unknown node kind {kind_code} at offset {r.pos - 1}")
    name = r.name()
    attrs: dict[str, AttrValue] = {}
    for _ in range(r.unpack(_U16)):
        key = r.name()
        if key in attrs:
            raise DuplicateNameError(f"duplicate attribute {key!r} on {name!r}")
        vtype = r.unpack(_U8)
        if vtype == 0:
            attrs[key] = str(r.take(r.unpack(_U32)), "utf-8")
        elif vtype == 1:
            attrs[key] = r.unpack(_I64)
        elif vtype == 2:
            attrs[key] = r.unpack(_F64)
        else:
            raise ParseError(f"unknown attribute value type {vtype}")
    if kind_code == 0:
        node = Node("group", name, attrs)
        for _ in range(r.unpack(_U32)):
            child = _decode_node(r)
            if child.name in node.children:
                raise DuplicateNameError(f"duplicate child name {child.name!r} in {name!r}")
            node.children[child.name] = child
        return node
    code = r.unpack(_U8)
    if code not in DTYPES:
        raise ParseError(f"unknown dtype code {code}")
    dtype = DTYPES[code][0]
    dims = tuple(r.unpack(_U64) for _ in range(r.unpack(_U8)))
    payload = bytes(r.take(element_size(dtype) * math.prod(dims)))
    return Node("dataset", name, attrs, {}, dtype, dims, payload)


def loads(data: bytes) -> Node:
    r = _Reader(data)
    if len(data) < 4 or bytes(data[:4]) != MAGIC:
        raise BadMagicError("bad magic")
    _, version, _flags = _HEADER.unpack(r.take(_HEADER.size))
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}")
    root = _decode_node(r)
    if root.kind != "group" or root.name != "":
        raise ParseError("root record must be an unnamed group")
    if r.pos != len(data):
        raise ParseError(f"{len(data) - r.pos} trailing bytes after root record")
    return root


def read_tree(source: Union[BinaryIO, bytes, str, os.PathLike]) -> Node:
    """Parse an NXPack tree from bytes, a binary stream, or a path."""
    if isinstance(source, (bytes, bytearray, memoryview)):
        return loads(bytes(source))
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as f:
            return loads(f.read())
    return loads(source.read())


# -- path access --------------------------------------------------------------

def split_path(path: str) -> list[str]:
    if not path.startswith("/"):
        raise PathNotFoundError(f"path must be absolute: {path!r}")
    return [part for part in path.split("/") if part]


def join_path(parent: str, name: str) -> str:
    return parent.rstrip("/") + "/" + name


def resolve(root: Node, path: str) -> Node:
    """Return the node at ``path``."""
    node = root
    for part in split_path(path):
        if not node.is_group:
            raise PathNotFoundError(path)
        try:
            node = node.children[part]
        except KeyError:
            raise PathNotFoundError(path) from None
    return node


def resolve_entry(root: Node, entry: str):
    """Resolve a node path or an ``<path>@<attr>`` address."""
    if "@" in entry:
        path, _, attr = entry.rpartition("@")
        return read_attr(root, path or "/", attr)
    return resolve(root, entry)


def list_children(root: Node, path: str, counters: AccessCounters | None = None) -> list[tuple[str, str]]:
    """Names and kinds of a group's children, in stored order.

    Charges one visit per child plus one per child attribute, so that a
    recursive listing from the root costs exactly the tree's entry count.
    """
    node = resolve(root, path)
    if not node.is_group:
        raise NotAGroupError(path)
    out = [(child.name, child.kind) for child in node.children.values()]
    if counters is not None:
        counters.entries_visited += len(out) + sum(len(c.attrs) for c in node.children.values())
    return out


def read_attr(root: Node, path: str, name: str) -> AttrValue:
    node = resolve(root, path)
    try:
        return node.attrs[name]
    except KeyError:
        raise AttributeNotFoundError(f"{path}@{name}") from None


def read_dataset(root: Node, path: str, counters: AccessCounters | None = None):
    """Return ``(dtype, dims, payload)`` of the dataset at ``path``."""
    node = resolve(root, path)
    if node.is_group:
        raise NotADatasetError(path)
    if counters is not None:
        counters.bytes_read += len(node.payload)
    return node.dtype, node.dims, node.payload


def iter_entries(root: Node, path: str = "/") -> Iterator[tuple[str, str, object]]:
    """Depth-first ``(entry_path, kind, obj)`` for every entry below ``path``.

    ``kind`` is ``"group"``, ``"dataset"`` or ``"attribute"``; attributes of
    the starting node are included but the starting node itself is not.
    """
    start = resolve(root, path)
    stack = [(path, start, False)]
    while stack:
        p, node, emit = stack.pop()
        if emit:
            yield p, node.kind, node
        for key, value in node.attrs.items():
            yield f"{p}@{key}", "attribute", value
        for child in reversed(node.children.values()):
            stack.append((join_path(p, child.name), child, True))


# -- digest -----------------------------------------------------------------

def _digest_into(h, node: Node) -> None:
    h.update(b"G" if node.is_group else b"D")
    raw = node.name.encode("utf-8")
    h.update(_U32.pack(len(raw)) + raw)
    h.update(_U32.pack(len(node.attrs)))
    for key in sorted(node.attrs):
        value = node.attrs[key]
        raw = key.encode("utf-8")
        h.update(_U32.pack(len(raw)) + raw)
        if isinstance(value, str):
            raw = value.encode("utf-8")
            h.update(b"s" + _U64.pack(len(raw)) + raw)
        elif isinstance(value, int):
            h.update(b"i" + _I64.pack(value))
        else:
            h.update(b"f" + _F64.pack(value))
    if node.is_group:
        h.update(_U32.pack(len(node.children)))
        for key in sorted(node.children):
            _digest_into(h, node.children[key])
    else:
        h.update(node.dtype.encode() + _U8.pack(len(node.dims)))
        for d in node.dims:
            h.update(_U64.pack(d))
        h.update(_U64.pack(len(node.payload)))
        h.update(node.payload)


def canonical_digest(root: Node) -> str:
    """SHA-256 over the tree with children and attributes visited in name order."""
    h = hashlib.sha256()
    _digest_into(h, root)
    return h.hexdigest()


def save(root: Node, path) -> int:
    return write_tree(root, path)


def load(path) -> Node:
    return read_tree(path)


__all__ = [
    "AccessCounters", "AttrValue", "AttributeNotFoundError", "BadMagicError",
    "ContainerError", "DuplicateNameError", "Node", "NotADatasetError",
    "NotAGroupError", "ParseError", "PathNotFoundError", "SchemaError",
    "TruncatedError", "UnsupportedVersionError", "canonical_digest", "dumps",
    "iter_entries", "join_path", "list_children", "load", "loads", "read_attr",
    "read_dataset", "read_tree", "resolve", "resolve_entry", "save",
    "split_path", "write_tree",
]

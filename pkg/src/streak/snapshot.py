"""Binary snapshot of a loaded store and its S-QuadTree.

Layout (little-endian): the magic ``STRK1``, a format version, then one
zlib stream holding the header, dictionary, quads, geometry bindings and
the tree section.
"""

from __future__ import annotations

import io
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import SnapshotError
from .geometry import MBR, parse_wkt
from .model import Dictionary, Term, TermKind, _literal_body
from .squadtree import SQuadTree, tree_from_bytes, tree_to_bytes
from .store import QuadStore

MAGIC = b"STRK1"
VERSION = 1
_KINDS = list(TermKind)


def _put_str(buf: io.BytesIO, s: str) -> None:
    raw = s.encode("utf-8")
    buf.write(struct.pack("<I", len(raw)))
    buf.write(raw)


def _get_str(view: io.BytesIO) -> str:
    (n,) = struct.unpack("<I", view.read(4))
    return view.read(n).decode("utf-8")


def dumps(store: QuadStore, tree: SQuadTree | None) -> bytes:
    buf = io.BytesIO()
    buf.write(struct.pack("<4dI", *store.space, store.max_levels))
    buf.write(struct.pack("<I", len(store.prefixes)))
    for name, iri in sorted(store.prefixes.items()):
        _put_str(buf, name)
        _put_str(buf, iri)

    items = sorted(store.dictionary.items())
    buf.write(struct.pack("<QQ", len(items), store.dictionary.next_non_spatial))
    for tid, term in items:
        buf.write(struct.pack("<QB", tid, _KINDS.index(term.kind)))
        _put_str(buf, term.lexical)

    buf.write(struct.pack("<Q", len(store.quads)))
    buf.write(np.ascontiguousarray(store.quads, dtype="<u8").tobytes())

    # spatial entity -> id of its geometry literal
    geo_lits = np.array(
        sorted(t for t, term in items if term.kind is TermKind.GEOMETRY), dtype=np.uint64
    )
    rows = store.quads[np.isin(store.quads[:, 3], geo_lits)]
    geo_term: dict[int, int] = {}
    for s, o in zip(rows[:, 1].tolist(), rows[:, 3].tolist()):
        if s in store.geometry_of and s not in geo_term:
            geo_term[s] = o
    if len(geo_term) != len(store.geometry_of):
        raise SnapshotError("some spatial entity has no geometry literal")
    buf.write(struct.pack("<Q", len(geo_term)))
    for sid, oid in sorted(geo_term.items()):
        buf.write(struct.pack("<QQ", sid, oid))

    tree_bytes = tree_to_bytes(tree) if tree is not None else b""
    buf.write(struct.pack("<Q", len(tree_bytes)))
    buf.write(tree_bytes)
    return MAGIC + struct.pack("<H", VERSION) + zlib.compress(buf.getvalue(), 6)


def loads(data: bytes) -> tuple[QuadStore, SQuadTree | None]:
    if not data.startswith(MAGIC):
        raise SnapshotError("not a snapshot file (bad magic)")
    (version,) = struct.unpack("<H", data[5:7])
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    try:
        view = io.BytesIO(zlib.decompress(data[7:]))
        *space, max_levels = struct.unpack("<4dI", view.read(36))
        (n_prefix,) = struct.unpack("<I", view.read(4))
        prefixes = {}
        for _ in range(n_prefix):
            name = _get_str(view)
            prefixes[name] = _get_str(view)

        dictionary = Dictionary()
        n_terms, next_ns = struct.unpack("<QQ", view.read(16))
        for _ in range(n_terms):
            tid, kind = struct.unpack("<QB", view.read(9))
            lexical = _get_str(view)
            term = _make_term(lexical, _KINDS[kind])
            dictionary._ids[term] = tid
            dictionary._terms[tid] = term
        dictionary.next_non_spatial = next_ns

        (n_quads,) = struct.unpack("<Q", view.read(8))
        quads = np.frombuffer(view.read(32 * n_quads), dtype="<u8").astype(np.uint64).reshape(-1, 4)

        (n_geo,) = struct.unpack("<Q", view.read(8))
        geometry_of = {}
        for _ in range(n_geo):
            sid, oid = struct.unpack("<QQ", view.read(16))
            geometry_of[sid] = dictionary.lookup(oid).geometry

        store = QuadStore(dictionary, quads, geometry_of, MBR(*space), max_levels, prefixes)
        (n_tree,) = struct.unpack("<Q", view.read(8))
        tree = tree_from_bytes(view.read(n_tree), store) if n_tree else None
    except (struct.error, zlib.error, KeyError, ValueError) as exc:
        raise SnapshotError(f"corrupt snapshot: {exc}") from None
    return store, tree


def _make_term(lexical: str, kind: TermKind) -> Term:
    if kind is TermKind.NUMERIC:
        return Term(lexical, kind, value=float(_literal_body(lexical)))
    if kind is TermKind.GEOMETRY:
        return Term(lexical, kind, geometry=parse_wkt(_literal_body(lexical)))
    return Term(lexical, kind)


def save(path: str | Path, store: QuadStore, tree: SQuadTree | None) -> int:
    data = dumps(store, tree)
    Path(path).write_bytes(data)
    return len(data)


def load(path: str | Path) -> tuple[QuadStore, SQuadTree | None]:
    return loads(Path(path).read_bytes())

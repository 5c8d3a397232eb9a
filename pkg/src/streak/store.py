"""Quad ingestion with sorted index scans and numeric block summaries."""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import spatial_id
from .errors import GeometryError, LocalIdOverflow, ParseError, WktSyntax
from .geometry import MBR, Geometry, indexed_space, mbr_of, parse_wkt, quadrant_path
from .model import (
    Dictionary,
    Quad,
    Term,
    TermKind,
    expand_iri,
    is_geometry_predicate,
    term_from_token,
)

# column positions inside the (n, 4) quad array
R, S, P, O = 0, 1, 2, 3
ORDERINGS: dict[str, tuple[int, ...]] = {
    "PSO": (P, S, O, R),
    "POS": (P, O, S, R),
    "SPO": (S, P, O, R),
    "OPS": (O, P, S, R),
    "RPS": (R, P, S, O),
}

_TOKEN_RE = re.compile(
    r"""\s*(
        <[^>\s]*>
      | "(?:[^"\\]|\\.)*"(?:\^\^(?:<[^>\s]*>|(?:[A-Za-z_][\w\-]*)?:(?:[\w\-]|\.(?=[\w\-]))*)|@[A-Za-z][A-Za-z0-9\-]*)?
      | _:(?:[\w\-]|\.(?=[\w\-]))+
      | \?\w+
      | [+-]?(?:\d+\.\d+|\.\d+|\d+)(?:[eE][+-]?\d+)?
      | (?:[A-Za-z_][\w\-]*)?:(?:[\w\-]|\.(?=[\w\-]))*
      | \.
    )""",
    re.X,
)
_MARKER_RE = re.compile(r"^#@\s*(<[^>\s]*>|\S+)\s*$")
_PREFIX_RE = re.compile(r"^@prefix\s+([A-Za-z_][\w\-]*)?:\s*<([^>]*)>\s*\.?\s*$", re.I)
_BASE_RE = re.compile(r"^@base\s+<([^>]*)>\s*\.?\s*$", re.I)


def _split_triple(line: str, lineno: int) -> tuple[str, str, str]:
    tokens = []
    pos = 0
    n = len(line)
    while pos < n:
        if line[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(line, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"cannot tokenize {line[pos:].strip()[:30]!r}", lineno)
        tokens.append(m.group(1))
        pos = m.end()
    if len(tokens) != 4 or tokens[3] != "." or "." in tokens[:3]:
        raise ParseError("expected '<subject> <predicate> <object> .'", lineno)
    return tokens[0], tokens[1], tokens[2]


@dataclass
class _Record:
    marker: str | None
    s: str
    p: str
    o: str
    line: int


class Cursor:
    """Forward iterator over one sorted ordering with ``skip_to`` support.

    The leading key is the first ordering column not fixed by the scan's
    constant prefix; ``skip_to(v)`` drops every remaining row whose leading
    key is below ``v``.
    """

    def __init__(self, rows: np.ndarray, lead: np.ndarray | None):
        self._rows = rows
        self._lead = lead
        self._pos = 0
        self.skipped = 0

    def __iter__(self) -> Iterator[Quad]:
        return self

    def __next__(self) -> Quad:
        if self._pos >= len(self._rows):
            raise StopIteration
        r, s, p, o = self._rows[self._pos]
        self._pos += 1
        return Quad(int(r), int(s), int(p), int(o))

    def peek_key(self) -> int | None:
        if self._pos >= len(self._rows) or self._lead is None:
            return None
        return int(self._lead[self._pos])

    def skip_to(self, value: int) -> None:
        if self._lead is None:
            return
        new = int(np.searchsorted(self._lead, np.uint64(value), side="left"))
        if new > self._pos:
            self.skipped += new - self._pos
            self._pos = new

    def take_until(self, value: int) -> np.ndarray:
        """Consume and return the rows whose leading key is <= ``value``."""
        if self._lead is None:
            out = self._rows[self._pos :]
            self._pos = len(self._rows)
            return out
        end = int(np.searchsorted(self._lead, np.uint64(value), side="right"))
        end = max(end, self._pos)
        out = self._rows[self._pos : end]
        self._pos = end
        return out

    def remaining(self) -> np.ndarray:
        out = self._rows[self._pos :]
        self._pos = len(self._rows)
        return out

    def __len__(self) -> int:
        return len(self._rows)


@dataclass
class NumericBlock:
    predicate: int
    block_index: int
    subjects: np.ndarray
    objects: np.ndarray
    values: np.ndarray
    min_val: float
    max_val: float

    @property
    def count(self) -> int:
        return len(self.values)

    @property
    def entries(self) -> list[tuple[int, float]]:
        return [(int(s), float(v)) for s, v in zip(self.subjects, self.values)]


class QuadStore:
    def __init__(
        self,
        dictionary: Dictionary,
        quads: np.ndarray,
        geometry_of: dict[int, Geometry],
        space: MBR,
        max_levels: int = 10,
        prefixes: dict[str, str] | None = None,
    ):
        self.dictionary = dictionary
        self.quads = quads.reshape(-1, 4).astype(np.uint64, copy=False)
        self.geometry_of = geometry_of
        self.mbr_of = {i: mbr_of(g) for i, g in geometry_of.items()}
        self.space = space
        self.max_levels = max_levels
        self.prefixes = dict(prefixes or {})
        self._orders: dict[str, tuple[np.ndarray, list[np.ndarray]]] = {}
        for name, cols in ORDERINGS.items():
            if len(self.quads):
                perm = np.lexsort(tuple(self.quads[:, c] for c in reversed(cols)))
                rows = self.quads[perm]
            else:
                rows = self.quads
            self._orders[name] = (rows, [np.ascontiguousarray(rows[:, c]) for c in cols])
        num_ids, num_vals = [], []
        for tid, term in dictionary.items():
            if term.kind is TermKind.NUMERIC:
                num_ids.append(tid)
                num_vals.append(term.value)
        order = np.argsort(np.array(num_ids, dtype=np.uint64), kind="stable")
        self._num_ids = np.array(num_ids, dtype=np.uint64)[order]
        self._num_vals = np.array(num_vals, dtype=np.float64)[order]
        self.numeric_value: dict[int, float] = dict(zip(map(int, self._num_ids), map(float, self._num_vals)))
        self._block_cache: dict[tuple[int, int], list[NumericBlock]] = {}
        sp = sorted(geometry_of)
        self.spatial_ids = np.array(sp, dtype=np.uint64)
        self.spatial_mbrs = (
            np.array([self.mbr_of[i] for i in sp], dtype=np.float64).reshape(-1, 4)
        )

    def __len__(self) -> int:
        return len(self.quads)

    # -- lookups ---------------------------------------------------------------

    def term_id(self, lexical_or_term: str | Term) -> int | None:
        if isinstance(lexical_or_term, Term):
            return self.dictionary.id_of(lexical_or_term)
        return self.dictionary.id_of(Term(lexical_or_term, TermKind.IRI))

    def lookup(self, term_id: int) -> Term:
        return self.dictionary.lookup(term_id)

    def numeric_values(self, ids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Values for ``ids`` and a mask telling which ids are numeric literals."""
        ids = np.asarray(ids, dtype=np.uint64)
        if len(self._num_ids) == 0:
            return np.zeros(len(ids)), np.zeros(len(ids), dtype=bool)
        pos = np.searchsorted(self._num_ids, ids)
        pos = np.minimum(pos, len(self._num_ids) - 1)
        mask = self._num_ids[pos] == ids
        return np.where(mask, self._num_vals[pos], np.nan), mask

    # -- scans -----------------------------------------------------------------

    def ordering(self, name: str) -> np.ndarray:
        return self._orders[name][0]

    def scan(
        self,
        pattern: Sequence[int | None],
        order: str | None = None,
    ) -> Cursor:
        """Cursor over quads matching ``pattern`` = (reif, s, p, o); ``None`` is a wildcard."""
        if order is None:
            order = best_ordering(pattern)
        rows, keys = self._orders[order]
        cols = ORDERINGS[order]
        if any(v is not None and v < 0 for v in pattern):
            # a negative id stands for a constant absent from the dictionary
            return Cursor(rows[:0], np.empty(0, dtype=np.uint64))
        lo, hi = 0, len(rows)
        depth = 0
        for c, key in zip(cols, keys):
            value = pattern[c]
            if value is None:
                break
            v = np.uint64(value)
            seg = key[lo:hi]
            new_lo = lo + int(np.searchsorted(seg, v, side="left"))
            new_hi = lo + int(np.searchsorted(seg, v, side="right"))
            lo, hi = new_lo, new_hi
            depth += 1
        sub = rows[lo:hi]
        rest = [c for c in cols[depth:] if pattern[c] is not None]
        if rest and len(sub):
            mask = np.ones(len(sub), dtype=bool)
            for c in rest:
                mask &= sub[:, c] == np.uint64(pattern[c])
            sub = sub[mask]
            lead = None
            if depth < len(cols):
                lead = np.ascontiguousarray(sub[:, cols[depth]])
        else:
            lead = keys[depth][lo:hi] if depth < len(cols) else None
        return Cursor(sub, lead)

    def count(self, pattern: Sequence[int | None]) -> int:
        return len(self.scan(pattern))

    # -- numeric summaries -----------------------------------------------------

    def numeric_blocks(self, predicate: int, block_size: int = 1024) -> list[NumericBlock]:
        key = (predicate, block_size)
        cached = self._block_cache.get(key)
        if cached is not None:
            return cached
        rows = self.scan((None, None, predicate, None), "PSO").remaining()
        # one entry per distinct (subject, object); PSO rows keep reifs adjacent
        if len(rows):
            keep = np.ones(len(rows), dtype=bool)
            keep[1:] = (rows[1:, S] != rows[:-1, S]) | (rows[1:, O] != rows[:-1, O])
            rows = rows[keep]
        vals, mask = self.numeric_values(rows[:, O])
        rows, vals = rows[mask], vals[mask]
        # descending value; ties broken by subject then object id for determinism
        order = np.lexsort((rows[:, O], rows[:, S], -vals))
        rows, vals = rows[order], vals[order]
        blocks = []
        for i, start in enumerate(range(0, len(vals), block_size)):
            chunk = slice(start, start + block_size)
            v = vals[chunk]
            blocks.append(
                NumericBlock(
                    predicate=predicate,
                    block_index=i,
                    subjects=rows[chunk, S],
                    objects=rows[chunk, O],
                    values=v,
                    min_val=float(v.min()),
                    max_val=float(v.max()),
                )
            )
        self._block_cache[key] = blocks
        return blocks

    def value_range(self, predicate: int) -> tuple[float, float] | None:
        blocks = self.numeric_blocks(predicate)
        if not blocks:
            return None
        return min(b.min_val for b in blocks), max(b.max_val for b in blocks)


def best_ordering(pattern: Sequence[int | None]) -> str:
    """Ordering whose sort prefix covers the most bound positions."""
    best, best_depth = "PSO", -1
    for name, cols in ORDERINGS.items():
        depth = 0
        for c in cols:
            if pattern[c] is None:
                break
            depth += 1
        if depth > best_depth:
            best, best_depth = name, depth
    return best


# -- loading --------------------------------------------------------------------

def _read_records(lines: Iterable[str]) -> tuple[list[_Record], dict[str, str], str | None]:
    records: list[_Record] = []
    prefixes: dict[str, str] = {}
    base: str | None = None
    pending: tuple[str, int] | None = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#@"):
            m = _MARKER_RE.match(line)
            if m is None:
                raise ParseError("malformed reification marker", lineno)
            if pending is not None:
                raise ParseError("reification marker not followed by a triple", pending[1])
            pending = (m.group(1), lineno)
            continue
        if line.startswith("#"):
            continue
        if line.startswith("@"):
            if pending is not None:
                raise ParseError("reification marker not followed by a triple", pending[1])
            m = _PREFIX_RE.match(line)
            if m is not None:
                prefixes[m.group(1) or ""] = m.group(2)
                continue
            m = _BASE_RE.match(line)
            if m is not None:
                base = m.group(1)
                continue
            raise ParseError("unknown directive", lineno)
        s, p, o = _split_triple(line, lineno)
        records.append(_Record(pending[0] if pending else None, s, p, o, lineno))
        pending = None
    if pending is not None:
        raise ParseError("reification marker not followed by a triple", pending[1])
    return records, prefixes, base


def load_reified(stream: str | Iterable[str], max_levels: int = 10) -> QuadStore:
    """Parse the reified Turtle-like format into a :class:`QuadStore`.

    Pass one collects geometries and mints spatial identifiers inside the
    space they span; pass two interns every term and emits quads.
    """
    if isinstance(stream, str):
        stream = stream.splitlines()
    max_levels = min(max_levels, spatial_id.MAX_LEVELS)
    records, prefixes, base = _read_records(stream)
    expanded: dict[str, str] = {}

    def canon(tok: str) -> str:
        out = expanded.get(tok)
        if out is None:
            out = expanded[tok] = expand_iri(tok, prefixes, base)
        return out

    # pass 1: geometries and spatial ids
    geoms: dict[str, Geometry] = {}
    geom_terms: dict[str, Term] = {}
    for rec in records:
        if is_geometry_predicate(canon(rec.p)):
            term = term_from_token(rec.o, prefixes, base)
            try:
                body = rec.o[1 : rec.o.index('"', 1)] if rec.o.startswith('"') else rec.o
                g = parse_wkt(body)
            except (WktSyntax, ValueError) as exc:
                raise GeometryError(f"invalid geometry literal: {exc}", rec.line) from None
            subj = canon(rec.s)
            prev = geoms.get(subj)
            if prev is not None and prev != g:
                raise GeometryError(f"{subj} has more than one geometry", rec.line)
            geoms[subj] = g
            geom_terms[rec.o] = Term(term.lexical, TermKind.GEOMETRY, geometry=g)

    mbrs = {s: mbr_of(g) for s, g in geoms.items()}
    space = indexed_space(list(mbrs.values()))
    counters: dict[tuple[int, ...], int] = defaultdict(int)
    spatial_ids: dict[str, int] = {}
    for subj, m in mbrs.items():
        path = quadrant_path(m, space, max_levels)
        while True:
            local = counters[path]
            try:
                raw = spatial_id.encode_id(path, local)
            except LocalIdOverflow:
                if not path:
                    raise
                path = path[:-1]
                continue
            counters[path] = local + 1
            break
        spatial_ids[subj] = raw

    # pass 2: intern and emit
    dictionary = Dictionary()
    cache: dict[str, int] = {}

    def intern(tok: str) -> int:
        tid = cache.get(tok)
        if tid is not None:
            return tid
        if tok in geom_terms:
            tid = dictionary.intern(geom_terms[tok])
        else:
            term = term_from_token(tok, prefixes, base)
            sid = spatial_ids.get(term.lexical) if term.kind is TermKind.IRI else None
            if sid is not None:
                tid = dictionary.intern(term, True, sid)
            else:
                tid = dictionary.intern(term)
        cache[tok] = tid
        return tid

    # spatial entities first so their terms are bound before any other use
    for subj, sid in spatial_ids.items():
        dictionary.intern(Term(subj, TermKind.IRI), True, sid)

    out = np.empty((len(records), 4), dtype=np.uint64)
    synthetic = 0
    for i, rec in enumerate(records):
        if rec.marker is not None:
            r = intern(rec.marker)
        else:
            r = dictionary.intern(Term(f"_:streak_q{synthetic}", TermKind.IRI))
            synthetic += 1
        out[i, 0] = r
        out[i, 1] = intern(rec.s)
        out[i, 2] = intern(rec.p)
        out[i, 3] = intern(rec.o)

    geometry_of = {spatial_ids[s]: g for s, g in geoms.items()}
    return QuadStore(dictionary, out, geometry_of, space, max_levels, prefixes)

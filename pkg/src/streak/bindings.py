"""Columnar binding tables and the pattern scans and joins over them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .model import Term
from .query import TriplePattern, Var
from .store import O, P, R, S, QuadStore, best_ordering

_EMPTY = np.zeros(0, dtype=np.uint64)


@dataclass
class Table:
    """Equal-length uint64 columns, one per variable."""

    cols: dict[str, np.ndarray]
    n: int = -1
    _sorted: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.n < 0:
            self.n = len(next(iter(self.cols.values()))) if self.cols else 1

    def __len__(self) -> int:
        return self.n

    @property
    def vars(self) -> list[str]:
        return list(self.cols)

    @classmethod
    def empty(cls, names: Iterable[str]) -> Table:
        return cls({v: _EMPTY for v in names}, 0)

    def take(self, idx: np.ndarray) -> Table:
        return Table({v: c[idx] for v, c in self.cols.items()}, len(idx))

    def filter(self, mask: np.ndarray) -> Table:
        return self.take(np.flatnonzero(mask))

    def sorted_on(self, var: str) -> tuple[np.ndarray, np.ndarray]:
        """(argsort, sorted keys) on ``var``; cached because scan tables are reused."""
        hit = self._sorted.get(var)
        if hit is None:
            order = np.argsort(self.cols[var], kind="stable")
            hit = self._sorted[var] = (order, self.cols[var][order])
        return hit

    def restrict(self, var: str, allowed: np.ndarray) -> Table:
        return self.filter(np.isin(self.cols[var], allowed))

    def distinct(self, var: str) -> np.ndarray:
        return np.unique(self.cols[var])


def concat(tables: list[Table], names: Iterable[str]) -> Table:
    names = list(names)
    parts = [t for t in tables if len(t)]
    if not parts:
        return Table.empty(names)
    return Table({v: np.concatenate([t.cols[v] for t in parts]) for v in names}, sum(len(t) for t in parts))


def join(left: Table, right: Table) -> Table:
    """Equi-join on every shared variable (sort-based; the right side's sort is cached)."""
    shared = [v for v in left.cols if v in right.cols]
    if not left.cols:
        return right if left.n else Table.empty(right.cols)
    if not right.cols:
        return left if right.n else Table.empty(left.cols)
    if not shared:
        li = np.repeat(np.arange(left.n), right.n)
        ri = np.tile(np.arange(right.n), left.n)
    else:
        key = shared[0]
        order, keys = right.sorted_on(key)
        probe = left.cols[key]
        lo = np.searchsorted(keys, probe, side="left")
        hi = np.searchsorted(keys, probe, side="right")
        counts = hi - lo
        total = int(counts.sum())
        li = np.repeat(np.arange(left.n), counts)
        starts = np.repeat(lo - (np.cumsum(counts) - counts), counts)
        ri = order[np.arange(total) + starts] if total else np.zeros(0, dtype=np.int64)
        for v in shared[1:]:
            ok = left.cols[v][li] == right.cols[v][ri]
            li, ri = li[ok], ri[ok]
    cols = {v: c[li] for v, c in left.cols.items()}
    for v, c in right.cols.items():
        if v not in cols:
            cols[v] = c[ri]
    return Table(cols, len(li))


def resolve(store: QuadStore, node) -> int | None:
    """Term id for a constant pattern position; ``None`` when the term never occurs."""
    if isinstance(node, Term):
        return store.dictionary.id_of(node)
    return None


def scan_pattern(
    store: QuadStore,
    t: TriplePattern,
    numeric_vars: set[str] | frozenset[str] = frozenset(),
    restrict: Mapping[str, np.ndarray] | None = None,
) -> Table:
    """All bindings of one pattern.

    Plain patterns match each distinct (s, p, o) once whatever the number of
    reifications; reified patterns match every quad. Variables in
    ``numeric_vars`` only bind numeric literals.
    """
    positions = (t.reif, t.s, t.p, t.o) if t.is_reified else (None, t.s, t.p, t.o)
    names = list(dict.fromkeys(n.name for n in positions if isinstance(n, Var)))
    const: list[int | None] = []
    for n in positions:
        if n is None or isinstance(n, Var):
            const.append(None)
        else:
            tid = resolve(store, n)
            if tid is None:
                return Table.empty(names)
            const.append(tid)
    if t.is_reified:
        rows = store.scan(const).remaining()
    else:
        order = best_ordering(const)
        if order == "RPS":
            order = "PSO"
        rows = store.scan(const, order).remaining()
        if len(rows) > 1:
            keep = np.ones(len(rows), dtype=bool)
            keep[1:] = np.any(rows[1:, 1:] != rows[:-1, 1:], axis=1)
            rows = rows[keep]
    # repeated variables inside one pattern must agree
    first_col: dict[str, int] = {}
    mask = None
    for col, n in zip((R, S, P, O), positions):
        if isinstance(n, Var):
            if n.name in first_col:
                eq = rows[:, first_col[n.name]] == rows[:, col]
                mask = eq if mask is None else mask & eq
            else:
                first_col[n.name] = col
    if isinstance(t.o, Var) and t.o.name in numeric_vars:
        _, num = store.numeric_values(rows[:, O])
        mask = num if mask is None else mask & num
    if restrict:
        for v, allowed in restrict.items():
            if v in first_col:
                ok = np.isin(rows[:, first_col[v]], allowed)
                mask = ok if mask is None else mask & ok
    if mask is not None:
        rows = rows[mask]
    return Table({v: np.ascontiguousarray(rows[:, c]) for v, c in first_col.items()}, len(rows))


def numeric_column(store: QuadStore, table: Table, var: str) -> np.ndarray:
    vals, _ = store.numeric_values(table.cols[var])
    return vals

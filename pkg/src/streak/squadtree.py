"""The S-QuadTree and the filtering metadata carried by its nodes."""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import spatial_id
from .bloom import CsSignature
from .errors import SnapshotError
from .geometry import MBR, cell_of, child_cells
from .spatial_id import IdRange, node_id_range
from .store import O, P, S, QuadStore


@dataclass(frozen=True)
class CsQuery:
    """Predicate sets a driven entity must carry (self) or see on its neighbours."""

    self_preds: frozenset[int]
    in_preds: frozenset[int] = frozenset()
    out_preds: frozenset[int] = frozenset()


class CsCatalog:
    """Global numbering of characteristic sets (exact predicate sets)."""

    def __init__(self) -> None:
        self._ids: dict[frozenset[int], int] = {}
        self.sets: list[frozenset[int]] = []

    def __len__(self) -> int:
        return len(self.sets)

    def intern(self, preds) -> int:
        key = frozenset(int(p) for p in preds)
        cs = self._ids.get(key)
        if cs is None:
            cs = self._ids[key] = len(self.sets)
            self.sets.append(key)
        return cs

    def id_of(self, preds) -> int | None:
        return self._ids.get(frozenset(preds))

    def supersets(self, preds) -> frozenset[int]:
        """Ids of every stored CS containing ``preds``."""
        want = frozenset(preds)
        return frozenset(i for i, s in enumerate(self.sets) if want <= s)


@dataclass
class TreeConfig:
    max_levels: int = 10
    leaf_capacity: int = 64
    bloom_bits: int = 1024
    bloom_hashes: int = 3


@dataclass(eq=False)
class SQuadTreeNode:
    path: tuple[int, ...]
    cell: MBR
    mbr: MBR | None
    e_list: np.ndarray
    residents: int
    own: int
    self_cs: CsSignature
    in_cs: CsSignature
    out_cs: CsSignature
    children: list[SQuadTreeNode | None] = field(default_factory=lambda: [None] * 4)

    @property
    def level(self) -> int:
        return len(self.path)

    @property
    def i_range(self) -> IdRange:
        return node_id_range(self.path)

    @property
    def is_leaf(self) -> bool:
        return all(c is None for c in self.children)

    def child_nodes(self) -> list[SQuadTreeNode]:
        return [c for c in self.children if c is not None]

    def signature(self, kind: str) -> CsSignature:
        return {"self": self.self_cs, "in": self.in_cs, "out": self.out_cs}[kind]

    def label(self) -> str:
        return "".join(str(d) for d in self.path) or "root"

    def __repr__(self) -> str:
        return f"SQuadTreeNode({self.label()}, residents={self.residents}, elist={len(self.e_list)})"


@dataclass
class SQuadTree:
    root: SQuadTreeNode
    space: MBR
    config: TreeConfig
    catalog: CsCatalog
    object_ids: np.ndarray
    object_mbrs: np.ndarray
    object_cs: np.ndarray

    def nodes(self) -> Iterator[SQuadTreeNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.child_nodes()))

    def find(self, path: Sequence[int]) -> SQuadTreeNode | None:
        node: SQuadTreeNode | None = self.root
        for d in path:
            if node is None:
                return None
            node = node.children[d]
        return node

    def self_cs_of(self, ids: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self.object_ids, np.asarray(ids, dtype=np.uint64))
        pos = np.minimum(pos, max(len(self.object_ids) - 1, 0))
        return self.object_cs[pos]

    def matching_cs(self, cs: CsQuery) -> dict[str, frozenset[int]]:
        out = {"self": self.catalog.supersets(cs.self_preds)}
        if cs.in_preds:
            out["in"] = self.catalog.supersets(cs.in_preds)
        if cs.out_preds:
            out["out"] = self.catalog.supersets(cs.out_preds)
        return out

    def dump(self) -> str:
        """One line per node: path, residents, E-list size, distinct self/in/out CS counts."""
        lines = []
        for node in self.nodes():
            lines.append(
                f"{'  ' * node.level}{node.label()} residents={node.residents} "
                f"elist={len(node.e_list)} cs={len(node.self_cs.exact_count)}/"
                f"{len(node.in_cs.exact_count)}/{len(node.out_cs.exact_count)}"
            )
        return "\n".join(lines)


# -- characteristic sets ----------------------------------------------------------

def _subject_cs(store: QuadStore, catalog: CsCatalog) -> dict[int, int]:
    spo = store.ordering("SPO")
    if not len(spo):
        return {}
    pairs = spo[:, [S, P]]
    keep = np.ones(len(pairs), dtype=bool)
    keep[1:] = np.any(pairs[1:] != pairs[:-1], axis=1)
    pairs = pairs[keep]
    starts = np.flatnonzero(np.r_[True, pairs[1:, 0] != pairs[:-1, 0]])
    ends = np.r_[starts[1:], len(pairs)]
    subj = pairs[:, 0].tolist()
    preds = pairs[:, 1].tolist()
    return {subj[a]: catalog.intern(preds[a:b]) for a, b in zip(starts.tolist(), ends.tolist())}


def _csr(obj_pos: np.ndarray, cs: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(obj_pos, kind="stable")
    counts = np.bincount(obj_pos, minlength=n)
    ptr = np.r_[0, np.cumsum(counts)]
    return ptr, cs[order]


def _gather(ptr: np.ndarray, vals: np.ndarray, idx: np.ndarray) -> np.ndarray:
    starts, stops = ptr[idx], ptr[idx + 1]
    lens = stops - starts
    total = int(lens.sum())
    if total == 0:
        return vals[:0]
    offs = np.repeat(starts - np.r_[0, np.cumsum(lens)[:-1]], lens)
    return vals[np.arange(total) + offs]


def _counts(values: np.ndarray) -> dict[int, int]:
    if not len(values):
        return {}
    u, c = np.unique(values, return_counts=True)
    return dict(zip(u.tolist(), c.tolist()))


def _intersecting(mbrs: np.ndarray, cell: MBR) -> np.ndarray:
    # cells are half-open on their upper sides
    return (
        (mbrs[:, 2] >= cell.minx)
        & (mbrs[:, 0] < cell.maxx)
        & (mbrs[:, 3] >= cell.miny)
        & (mbrs[:, 1] < cell.maxy)
    )


def build(store: QuadStore, config: TreeConfig | None = None) -> SQuadTree:
    """Build the tree over every spatial entity of ``store``."""
    config = config or TreeConfig()
    max_levels = min(config.max_levels, store.max_levels, spatial_id.MAX_LEVELS)
    catalog = CsCatalog()
    subj_cs = _subject_cs(store, catalog)
    empty_cs = catalog.intern(())

    ids = store.spatial_ids
    mbrs = store.spatial_mbrs
    n = len(ids)
    levels = (ids & np.uint64(spatial_id.L_MASK)).astype(np.int64)
    self_cs = np.array([subj_cs.get(int(i), empty_cs) for i in ids], dtype=np.int64)

    def neighbour_pairs(rows: np.ndarray, ent_col: int, other_col: int):
        if not len(rows) or not n:
            return np.zeros(0, np.int64), np.zeros(0, np.int64)
        ent = rows[:, ent_col]
        pos = np.searchsorted(ids, ent)
        pos = np.minimum(pos, n - 1)
        ok = ids[pos] == ent
        other = rows[ok, other_col].tolist()
        cs = np.array([subj_cs.get(o, empty_cs) for o in other], dtype=np.int64)
        return pos[ok].astype(np.int64), cs

    spatial_floor = np.uint64(spatial_id.S_MASK)
    ops = store.ordering("OPS")
    in_rows = ops[ops[:, O] >= spatial_floor] if len(ops) else ops
    spo = store.ordering("SPO")
    out_rows = spo[spo[:, S] >= spatial_floor] if len(spo) else spo
    in_ptr, in_vals = _csr(*neighbour_pairs(in_rows, O, S), n)
    out_ptr, out_vals = _csr(*neighbour_pairs(out_rows, S, O), n)

    m, k = config.bloom_bits, config.bloom_hashes

    def make(path: tuple[int, ...], cell: MBR, idx: np.ndarray) -> SQuadTreeNode:
        lo, hi = node_id_range(path)
        sub = ids[idx]
        res_mask = (sub >= np.uint64(lo)) & (sub <= np.uint64(hi)) & (levels[idx] >= len(path))
        residents = int(res_mask.sum())
        own = int((res_mask & (levels[idx] == len(path))).sum())
        e_list = np.sort(sub[~res_mask])
        if len(idx):
            box = mbrs[idx]
            mbr = MBR(
                max(float(box[:, 0].min()), cell.minx),
                max(float(box[:, 1].min()), cell.miny),
                min(float(box[:, 2].max()), cell.maxx),
                min(float(box[:, 3].max()), cell.maxy),
            )
        else:
            mbr = None
        node = SQuadTreeNode(
            path=path,
            cell=cell,
            mbr=mbr,
            e_list=e_list,
            residents=residents,
            own=own,
            self_cs=CsSignature.from_counts(_counts(self_cs[idx]), m, k),
            in_cs=CsSignature.from_counts(_counts(_gather(in_ptr, in_vals, idx)), m, k),
            out_cs=CsSignature.from_counts(_counts(_gather(out_ptr, out_vals, idx)), m, k),
        )
        if len(path) >= max_levels or residents <= config.leaf_capacity:
            node.own = residents
            return node
        for q, child_cell in enumerate(child_cells(cell)):
            child_idx = idx[_intersecting(mbrs[idx], child_cell)]
            if len(child_idx):
                node.children[q] = make(path + (q,), child_cell, child_idx)
        return node

    root = make((), store.space, np.arange(n))
    return SQuadTree(root, store.space, config, catalog, ids, mbrs, self_cs)


# -- queries ----------------------------------------------------------------------

def node_contains(node: SQuadTreeNode, raw: int) -> bool:
    """Membership through the I-Range (with the level check) or the E-List."""
    if spatial_id.in_subtree(raw, node.path):
        return True
    e = node.e_list
    pos = int(np.searchsorted(e, np.uint64(raw)))
    return pos < len(e) and int(e[pos]) == raw


def contains_many(node: SQuadTreeNode, ids: np.ndarray) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.uint64)
    lo, hi = node.i_range
    mask = (ids >= np.uint64(lo)) & (ids <= np.uint64(hi))
    mask &= (ids & np.uint64(spatial_id.L_MASK)) >= np.uint64(node.level)
    if len(node.e_list):
        mask |= np.isin(ids, node.e_list)
    return mask


def mbr_distance_many(boxes: np.ndarray, m: MBR) -> np.ndarray:
    dx = np.maximum(0.0, np.maximum(m.minx - boxes[:, 2], boxes[:, 0] - m.maxx))
    dy = np.maximum(0.0, np.maximum(m.miny - boxes[:, 3], boxes[:, 1] - m.maxy))
    return np.hypot(dx, dy)


def cs_matches(node: SQuadTreeNode, matching: dict[str, frozenset[int]]) -> bool:
    return all(node.signature(kind).matches(ids) for kind, ids in matching.items())


@dataclass
class Candidates:
    nodes: list[SQuadTreeNode]
    frontier: list[SQuadTreeNode]
    matching: dict[str, frozenset[int]]

    def __contains__(self, node: SQuadTreeNode) -> bool:
        return any(n is node for n in self.nodes)


def candidate_nodes(
    tree: SQuadTree,
    driver_mbrs: np.ndarray | Sequence[MBR],
    driven_cs: CsQuery,
    d: float,
) -> Candidates:
    """Phase 1: top-down search for nodes near a driver object that may hold the driven CS."""
    boxes = np.asarray(driver_mbrs, dtype=np.float64).reshape(-1, 4)
    matching = tree.matching_cs(driven_cs)
    picked: list[SQuadTreeNode] = []
    frontier: list[SQuadTreeNode] = []

    def visit(node: SQuadTreeNode, near: np.ndarray) -> bool:
        if node.mbr is None or not len(near):
            return False
        near = near[mbr_distance_many(near, node.mbr) <= d]
        if not len(near) or not cs_matches(node, matching):
            return False
        picked.append(node)
        any_child = False
        for child in node.child_nodes():
            any_child |= visit(child, near)
        if not any_child:
            frontier.append(node)
        return True

    visit(tree.root, boxes)
    return Candidates(picked, frontier, matching)


# -- binary form ------------------------------------------------------------------

_NODE_HEAD = struct.Struct("<BIBIIB")


# Bloom bits are a pure function of the CS ids, so only the exact counts are
# written and the filters are rebuilt on load.


def _write_sig(buf: io.BytesIO, sig: CsSignature) -> None:
    items = sorted(sig.exact_count.items())
    buf.write(struct.pack("<I", len(items)))
    for cs, n in items:
        buf.write(struct.pack("<II", cs, n))


def _read_sig(view: io.BytesIO, m: int, k: int) -> CsSignature:
    (count,) = struct.unpack("<I", view.read(4))
    exact = {}
    for _ in range(count):
        cs, n = struct.unpack("<II", view.read(8))
        exact[cs] = n
    return CsSignature.from_counts(exact, m, k)


def tree_to_bytes(tree: SQuadTree) -> bytes:
    buf = io.BytesIO()
    cfg = tree.config
    buf.write(struct.pack("<4d", *tree.space))
    buf.write(struct.pack("<IIII", cfg.max_levels, cfg.leaf_capacity, cfg.bloom_bits, cfg.bloom_hashes))
    buf.write(struct.pack("<I", len(tree.catalog)))
    for s in tree.catalog.sets:
        preds = sorted(s)
        buf.write(struct.pack("<I", len(preds)))
        buf.write(np.array(preds, dtype="<u8").tobytes())
    buf.write(struct.pack("<I", len(tree.object_cs)))
    buf.write(np.asarray(tree.object_cs, dtype="<u4").tobytes())
    for node in tree.nodes():
        mask = sum(1 << q for q, c in enumerate(node.children) if c is not None)
        z = spatial_id.z_bits(node.path)
        buf.write(_NODE_HEAD.pack(node.level, z, mask, node.residents, node.own, node.mbr is not None))
        if node.mbr is not None:
            buf.write(struct.pack("<4d", *node.mbr))
        buf.write(struct.pack("<I", len(node.e_list)))
        buf.write(np.asarray(node.e_list, dtype="<u8").tobytes())
        for sig in (node.self_cs, node.in_cs, node.out_cs):
            _write_sig(buf, sig)
    return buf.getvalue()


def tree_from_bytes(data: bytes, store: QuadStore) -> SQuadTree:
    view = io.BytesIO(data)
    try:
        space = MBR(*struct.unpack("<4d", view.read(32)))
        cfg = TreeConfig(*struct.unpack("<IIII", view.read(16)))
        catalog = CsCatalog()
        (ncs,) = struct.unpack("<I", view.read(4))
        for _ in range(ncs):
            (n,) = struct.unpack("<I", view.read(4))
            catalog.intern(np.frombuffer(view.read(8 * n), dtype="<u8").tolist())
        (nobj,) = struct.unpack("<I", view.read(4))
        object_cs = np.frombuffer(view.read(4 * nobj), dtype="<u4").astype(np.int64)

        def read_node() -> SQuadTreeNode:
            level, z, mask, residents, own, has_mbr = _NODE_HEAD.unpack(view.read(_NODE_HEAD.size))
            path = tuple((z >> (spatial_id.Z_BITS - 2 * (i + 1))) & 3 for i in range(level))
            mbr = MBR(*struct.unpack("<4d", view.read(32))) if has_mbr else None
            (ne,) = struct.unpack("<I", view.read(4))
            e_list = np.frombuffer(view.read(8 * ne), dtype="<u8").astype(np.uint64)
            sigs = [_read_sig(view, cfg.bloom_bits, cfg.bloom_hashes) for _ in range(3)]
            node = SQuadTreeNode(path, cell_of(path, space), mbr, e_list, residents, own, *sigs)
            for q in range(4):
                if mask & (1 << q):
                    node.children[q] = read_node()
            return node

        root = read_node()
    except (struct.error, ValueError) as exc:
        raise SnapshotError(f"corrupt tree section: {exc}") from None
    if len(object_cs) != len(store.spatial_ids):
        raise SnapshotError("tree section does not match the store")
    return SQuadTree(root, space, cfg, catalog, store.spatial_ids, store.spatial_mbrs, object_cs)

"""Sort-Tile-Recursive R-tree and the synchronous-traversal distance join baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(eq=False)
class RNode:
    mbr: np.ndarray  # (4,) minx, miny, maxx, maxy
    children: list[RNode] = field(default_factory=list)
    # leaves only: positions into the tree's object arrays
    items: np.ndarray | None = None

    @property
    def is_leaf(self) -> bool:
        return self.items is not None


@dataclass
class RTree:
    root: RNode | None
    ids: np.ndarray
    mbrs: np.ndarray
    fanout: int
    height: int

    def __len__(self) -> int:
        return len(self.ids)

    def leaves(self) -> list[RNode]:
        out, stack = [], [self.root] if self.root else []
        while stack:
            n = stack.pop()
            if n.is_leaf:
                out.append(n)
            else:
                stack.extend(n.children)
        return out

    def search(self, box) -> np.ndarray:
        """Ids of objects whose MBR intersects ``box``."""
        box = np.asarray(box, dtype=np.float64)
        hits = []
        stack = [self.root] if self.root else []
        while stack:
            n = stack.pop()
            if not _boxes_meet(n.mbr, box):
                continue
            if n.is_leaf:
                m = self.mbrs[n.items]
                ok = (m[:, 0] <= box[2]) & (m[:, 2] >= box[0]) & (m[:, 1] <= box[3]) & (m[:, 3] >= box[1])
                hits.append(self.ids[n.items[ok]])
            else:
                stack.extend(n.children)
        return np.concatenate(hits) if hits else self.ids[:0]


def _boxes_meet(a: np.ndarray, b: np.ndarray) -> bool:
    return a[0] <= b[2] and b[0] <= a[2] and a[1] <= b[3] and b[1] <= a[3]


def _cover(boxes: np.ndarray) -> np.ndarray:
    return np.array([boxes[:, 0].min(), boxes[:, 1].min(), boxes[:, 2].max(), boxes[:, 3].max()])


def _str_groups(boxes: np.ndarray, fanout: int) -> list[np.ndarray]:
    """Partition row positions of ``boxes`` into STR tiles of at most ``fanout``."""
    n = len(boxes)
    pages = math.ceil(n / fanout)
    slices = math.ceil(math.sqrt(pages))
    cx = (boxes[:, 0] + boxes[:, 2]) / 2.0
    cy = (boxes[:, 1] + boxes[:, 3]) / 2.0
    by_x = np.argsort(cx, kind="stable")
    per_slice = slices * fanout
    groups = []
    for start in range(0, n, per_slice):
        chunk = by_x[start : start + per_slice]
        chunk = chunk[np.argsort(cy[chunk], kind="stable")]
        groups.extend(chunk[i : i + fanout] for i in range(0, len(chunk), fanout))
    return groups


def str_bulk_load(ids: np.ndarray, mbrs: np.ndarray, fanout: int = 16) -> RTree:
    if fanout < 2:
        raise ValueError("fanout must be at least 2")
    ids = np.asarray(ids)
    mbrs = np.asarray(mbrs, dtype=np.float64).reshape(-1, 4)
    if not len(ids):
        return RTree(None, ids, mbrs, fanout, 0)
    level = [RNode(_cover(mbrs[g]), items=g) for g in _str_groups(mbrs, fanout)]
    height = 1
    while len(level) > 1:
        boxes = np.array([n.mbr for n in level])
        level = [RNode(_cover(boxes[g]), children=[level[i] for i in g]) for g in _str_groups(boxes, fanout)]
        height += 1
    return RTree(level[0], ids, mbrs, fanout, height)


def _box_distance(a: np.ndarray, b: np.ndarray) -> float:
    dx = max(0.0, a[0] - b[2], b[0] - a[2])
    dy = max(0.0, a[1] - b[3], b[1] - a[3])
    return math.hypot(dx, dy)


def _pair_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    dx = np.maximum(0.0, np.maximum(a[:, None, 0] - b[None, :, 2], b[None, :, 0] - a[:, None, 2]))
    dy = np.maximum(0.0, np.maximum(a[:, None, 1] - b[None, :, 3], b[None, :, 1] - a[:, None, 3]))
    return np.hypot(dx, dy)


@dataclass
class JoinResult:
    pairs: np.ndarray  # (n, 2) ids: left, right
    node_pairs_visited: int = 0

    @property
    def candidate_count(self) -> int:
        return len(self.pairs)


def sync_traversal_join(a: RTree, b: RTree, d: float) -> JoinResult:
    """All (left, right) id pairs whose MBRs lie within ``d``, found by paired descent."""
    out: list[np.ndarray] = []
    visited = 0
    if a.root is None or b.root is None:
        return JoinResult(np.zeros((0, 2), dtype=np.uint64))
    stack = [(a.root, b.root)]
    while stack:
        x, y = stack.pop()
        visited += 1
        if _box_distance(x.mbr, y.mbr) > d:
            continue
        if x.is_leaf and y.is_leaf:
            dist = _pair_distances(a.mbrs[x.items], b.mbrs[y.items])
            li, ri = np.nonzero(dist <= d)
            if len(li):
                out.append(np.stack([a.ids[x.items[li]], b.ids[y.items[ri]]], axis=1))
        elif y.is_leaf or (not x.is_leaf and _area(x.mbr) >= _area(y.mbr)):
            stack.extend((c, y) for c in x.children)
        else:
            stack.extend((x, c) for c in y.children)
    pairs = np.concatenate(out) if out else np.zeros((0, 2), dtype=a.ids.dtype)
    return JoinResult(pairs, visited)


def _area(m: np.ndarray) -> float:
    return float((m[2] - m[0]) * (m[3] - m[1]))

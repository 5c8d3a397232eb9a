"""Planar geometry primitives and quadrant paths."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .errors import OutsideSpace, WktSyntax

Point = tuple[float, float]


class MBR(NamedTuple):
    minx: float
    miny: float
    maxx: float
    maxy: float

    @property
    def width(self) -> float:
        return self.maxx - self.minx

    @property
    def height(self) -> float:
        return self.maxy - self.miny

    @property
    def diagonal(self) -> float:
        return math.hypot(self.maxx - self.minx, self.maxy - self.miny)

    def contains(self, other: MBR) -> bool:
        return (
            self.minx <= other.minx
            and self.miny <= other.miny
            and other.maxx <= self.maxx
            and other.maxy <= self.maxy
        )

    def intersects(self, other: MBR) -> bool:
        return not (
            other.minx > self.maxx
            or other.maxx < self.minx
            or other.miny > self.maxy
            or other.maxy < self.miny
        )

    def union(self, other: MBR) -> MBR:
        return MBR(
            min(self.minx, other.minx),
            min(self.miny, other.miny),
            max(self.maxx, other.maxx),
            max(self.maxy, other.maxy),
        )

    def intersection(self, other: MBR) -> MBR | None:
        if not self.intersects(other):
            return None
        return MBR(
            max(self.minx, other.minx),
            max(self.miny, other.miny),
            min(self.maxx, other.maxx),
            min(self.maxy, other.maxy),
        )

    def expanded(self, dx: float, dy: float | None = None) -> MBR:
        if dy is None:
            dy = dx
        return MBR(self.minx - dx, self.miny - dy, self.maxx + dx, self.maxy + dy)


@dataclass(frozen=True)
class Geometry:
    kind: str  # "point" | "linestring" | "polygon"
    vertices: tuple[Point, ...]

    def __post_init__(self) -> None:
        n = len(self.vertices)
        if self.kind == "point" and n != 1:
            raise ValueError("a point has exactly one vertex")
        if self.kind == "linestring" and n < 2:
            raise ValueError("a linestring needs at least two vertices")
        if self.kind == "polygon":
            if n < 3:
                raise ValueError("a polygon needs at least three vertices")
            if self.vertices[0] != self.vertices[-1]:
                object.__setattr__(self, "vertices", self.vertices + (self.vertices[0],))

    @classmethod
    def point(cls, x: float, y: float) -> Geometry:
        return cls("point", ((float(x), float(y)),))

    @classmethod
    def linestring(cls, pts: Sequence[Point]) -> Geometry:
        return cls("linestring", tuple((float(x), float(y)) for x, y in pts))

    @classmethod
    def polygon(cls, pts: Sequence[Point]) -> Geometry:
        return cls("polygon", tuple((float(x), float(y)) for x, y in pts))

    def to_wkt(self) -> str:
        body = ", ".join(f"{x!r} {y!r}" for x, y in self.vertices)
        if self.kind == "point":
            return f"POINT({body})"
        if self.kind == "linestring":
            return f"LINESTRING({body})"
        return f"POLYGON(({body}))"


# -- WKT --------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"\s*(?:(?P<num>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<punct>[(),])|(?P<word>[A-Za-z]+))")
_KINDS = {"POINT": "point", "LINESTRING": "linestring", "POLYGON": "polygon"}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    raw = text.encode("utf-8")
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            offset = len(text[:pos].encode("utf-8"))
            while offset < len(raw) and raw[offset : offset + 1].isspace():
                offset += 1
            raise WktSyntax(f"unexpected character {text[pos:].strip()[:1]!r}", offset)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), len(text[:start].encode("utf-8"))))
        pos = m.end()
    return tokens


def parse_wkt(text: str) -> Geometry:
    """Parse POINT / LINESTRING / POLYGON text.

    Both standard WKT (``POINT(1 2)``, ``LINESTRING(0 0, 1 1)``) and the
    comma-separated variant (``POINT(28.6,77.2)``,
    ``LINESTRING((28.3,77.5),(28.4,77.6))``) are accepted.
    """
    tokens = _tokenize(text)
    end = len(text.encode("utf-8"))
    if not tokens or tokens[0][0] != "word" or tokens[0][1].upper() not in _KINDS:
        raise WktSyntax("expected a geometry type keyword", tokens[0][2] if tokens else 0)
    kind = _KINDS[tokens[0][1].upper()]
    pos = 1

    def group(i: int):
        if i >= len(tokens) or tokens[i][1] != "(":
            raise WktSyntax("expected '('", tokens[i][2] if i < len(tokens) else end)
        open_at = tokens[i][2]
        i += 1
        items: list = []
        if i < len(tokens) and tokens[i][1] == ")":
            raise WktSyntax("empty coordinate list", open_at)
        while True:
            if i >= len(tokens):
                raise WktSyntax("unterminated '('", end)
            if tokens[i][1] == "(":
                sub, i = group(i)
                items.append(sub)
            else:
                nums = []
                while i < len(tokens) and tokens[i][0] == "num":
                    nums.append(float(tokens[i][1]))
                    i += 1
                if not nums:
                    raise WktSyntax("expected a coordinate", tokens[i][2] if i < len(tokens) else end)
                items.append(nums)
            if i >= len(tokens):
                raise WktSyntax("unterminated '('", end)
            if tokens[i][1] == ",":
                i += 1
                continue
            if tokens[i][1] == ")":
                return (items, open_at), i + 1
            raise WktSyntax(f"unexpected {tokens[i][1]!r}", tokens[i][2])

    (items, open_at), pos = group(pos)
    if pos != len(tokens):
        raise WktSyntax("trailing input", tokens[pos][2])
    try:
        verts = _vertices(items, open_at, kind)
        return Geometry(kind, tuple(verts))
    except ValueError as exc:
        if isinstance(exc, WktSyntax):
            raise
        raise WktSyntax(str(exc), open_at) from None


def _vertices(items: list, offset: int, kind: str) -> list[Point]:
    if all(isinstance(it, list) for it in items):
        if all(len(it) == 2 for it in items):
            return [(it[0], it[1]) for it in items]
        if len(items) == 2 and all(len(it) == 1 for it in items):
            return [(items[0][0], items[1][0])]
        raise WktSyntax("coordinates must be pairs", offset)
    if all(isinstance(it, tuple) for it in items):
        parts = [_vertices(sub, off, kind) for sub, off in items]
        if all(len(p) == 1 for p in parts):
            return [p[0] for p in parts]
        if kind == "polygon":
            return parts[0]  # outer ring; holes are not modelled
        if len(parts) == 1:
            return parts[0]
        raise WktSyntax("multiple coordinate sequences", offset)
    raise WktSyntax("mixed coordinate nesting", offset)


# -- bounding rectangles and distances --------------------------------------------

def mbr_of(g: Geometry) -> MBR:
    xs = [v[0] for v in g.vertices]
    ys = [v[1] for v in g.vertices]
    return MBR(min(xs), min(ys), max(xs), max(ys))


def mbr_min_distance(a: MBR, b: MBR) -> float:
    dx = max(b.minx - a.maxx, a.minx - b.maxx, 0.0)
    dy = max(b.miny - a.maxy, a.miny - b.maxy, 0.0)
    if dx == 0.0:
        return dy
    if dy == 0.0:
        return dx
    return math.hypot(dx, dy)


def _point_segment(px: float, py: float, ax: float, ay: float, bx: float, by: float) -> float:
    dx, dy = bx - ax, by - ay
    seg2 = dx * dx + dy * dy
    if seg2 == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / seg2
    if t <= 0.0:
        return math.hypot(px - ax, py - ay)
    if t >= 1.0:
        return math.hypot(px - bx, py - by)
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def _orient(ax, ay, bx, by, cx, cy) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _on_segment(ax, ay, bx, by, cx, cy) -> bool:
    return min(ax, bx) <= cx <= max(ax, bx) and min(ay, by) <= cy <= max(ay, by)


def _segments_intersect(a0: Point, a1: Point, b0: Point, b1: Point) -> bool:
    d1 = _orient(*b0, *b1, *a0)
    d2 = _orient(*b0, *b1, *a1)
    d3 = _orient(*a0, *a1, *b0)
    d4 = _orient(*a0, *a1, *b1)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True
    if d1 == 0 and _on_segment(*b0, *b1, *a0):
        return True
    if d2 == 0 and _on_segment(*b0, *b1, *a1):
        return True
    if d3 == 0 and _on_segment(*a0, *a1, *b0):
        return True
    if d4 == 0 and _on_segment(*a0, *a1, *b1):
        return True
    return False


def _segment_distance(a0: Point, a1: Point, b0: Point, b1: Point) -> float:
    if _segments_intersect(a0, a1, b0, b1):
        return 0.0
    return min(
        _point_segment(*a0, *b0, *b1),
        _point_segment(*a1, *b0, *b1),
        _point_segment(*b0, *a0, *a1),
        _point_segment(*b1, *a0, *a1),
    )


def _segments(g: Geometry) -> list[tuple[Point, Point]]:
    v = g.vertices
    if len(v) == 1:
        return [(v[0], v[0])]
    return list(zip(v[:-1], v[1:]))


def point_in_polygon(x: float, y: float, ring: Sequence[Point]) -> bool:
    """Even-odd ray casting; boundary points may land on either side."""
    inside = False
    n = len(ring)
    j = n - 1
    for i in range(n):
        xi, yi = ring[i]
        xj, yj = ring[j]
        if (yi > y) != (yj > y):
            xcross = xi + (y - yi) * (xj - xi) / (yj - yi)
            if x < xcross:
                inside = not inside
        j = i
    return inside


def exact_distance(a: Geometry, b: Geometry) -> float:
    """Minimum Euclidean distance between two geometries.

    Polygons are solid: the distance is zero when one geometry lies inside
    the other.
    """
    if a.kind == "point" and b.kind == "point":
        (ax, ay), (bx, by) = a.vertices[0], b.vertices[0]
        return math.hypot(ax - bx, ay - by)
    if a.kind == "polygon" and any(point_in_polygon(x, y, a.vertices) for x, y in b.vertices[:1]):
        return 0.0
    if b.kind == "polygon" and any(point_in_polygon(x, y, b.vertices) for x, y in a.vertices[:1]):
        return 0.0
    best = math.inf
    if a.kind == "point":
        px, py = a.vertices[0]
        for s0, s1 in _segments(b):
            best = min(best, _point_segment(px, py, *s0, *s1))
        return best
    if b.kind == "point":
        px, py = b.vertices[0]
        for s0, s1 in _segments(a):
            best = min(best, _point_segment(px, py, *s0, *s1))
        return best
    for a0, a1 in _segments(a):
        for b0, b1 in _segments(b):
            d = _segment_distance(a0, a1, b0, b1)
            if d < best:
                best = d
                if best == 0.0:
                    return 0.0
    return best


# -- quadrant paths ---------------------------------------------------------------

def quadrant_path(m: MBR, space: MBR, max_levels: int) -> tuple[int, ...]:
    """Digits (2*yBit + xBit) of the deepest cell, at most ``max_levels`` deep, holding ``m``.

    Cells are half-open on their upper sides, so an edge lying exactly on a
    split line belongs to the upper/right child.
    """
    if not 0 <= max_levels <= 10:
        raise ValueError("max_levels must lie in 0..10")
    if not space.contains(m):
        raise OutsideSpace(f"{m} is not inside the indexed space {space}")
    x0, y0, x1, y1 = space
    digits: list[int] = []
    for _ in range(max_levels):
        cx = (x0 + x1) / 2.0
        cy = (y0 + y1) / 2.0
        if m.maxx < cx:
            xb = 0
        elif m.minx >= cx:
            xb = 1
        else:
            break
        if m.maxy < cy:
            yb = 0
        elif m.miny >= cy:
            yb = 1
        else:
            break
        digits.append(2 * yb + xb)
        if xb:
            x0 = cx
        else:
            x1 = cx
        if yb:
            y0 = cy
        else:
            y1 = cy
    return tuple(digits)


def cell_of(path: Sequence[int], space: MBR) -> MBR:
    """The cell reached by descending ``space`` along ``path``."""
    x0, y0, x1, y1 = space
    for d in path:
        cx = (x0 + x1) / 2.0
        cy = (y0 + y1) / 2.0
        if d & 1:
            x0 = cx
        else:
            x1 = cx
        if d & 2:
            y0 = cy
        else:
            y1 = cy
    return MBR(x0, y0, x1, y1)


def child_cells(cell: MBR) -> list[MBR]:
    cx = (cell.minx + cell.maxx) / 2.0
    cy = (cell.miny + cell.maxy) / 2.0
    return [
        MBR(cell.minx, cell.miny, cx, cy),
        MBR(cx, cell.miny, cell.maxx, cy),
        MBR(cell.minx, cy, cx, cell.maxy),
        MBR(cx, cy, cell.maxx, cell.maxy),
    ]


def indexed_space(mbrs: Sequence[MBR]) -> MBR:
    """Union of ``mbrs`` grown by 0.1% per side (unit padding when degenerate)."""
    if not mbrs:
        return MBR(0.0, 0.0, 1.0, 1.0)
    u = mbrs[0]
    for m in mbrs[1:]:
        u = u.union(m)
    w, h = u.width, u.height
    span = max(w, h)
    px = 0.001 * w if w > 0 else (0.001 * span if span > 0 else 1.0)
    py = 0.001 * h if h > 0 else (0.001 * span if span > 0 else 1.0)
    return u.expanded(px, py)

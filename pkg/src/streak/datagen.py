"""Deterministic synthetic datasets in the reified input format."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .geometry import Geometry

EX = "http://streak.example/"
YAGO = "http://yago-knowledge.org/resource/"
LGD_POINTS = "http://geoknow.eu/uk_points#"
RDF_TYPE = "<http://www.w3.org/1999/02/22-rdf-syntax-ns#type>"
RDFS_LABEL = "<http://www.w3.org/2000/01/rdf-schema#label>"
XSD_DOUBLE = "<http://www.w3.org/2001/XMLSchema#double>"
WKT_TYPE = "<http://www.opengis.net/ont/geosparql#wktLiteral>"
HEADER = (
    "@prefix xsd: <http://www.w3.org/2001/XMLSchema#> .\n"
    "@prefix rdf: <http://www.w3.org/1999/02/22-rdf-syntax-ns#> .\n"
)


@dataclass(frozen=True)
class Distribution:
    kind: str = "uniform"  # "uniform" | "exponential"
    lam: float = 1.0
    low: float = 0.0
    high: float = 1.0

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Exponential draws are truncated to [low, high] by inverting the truncated CDF."""
        u = rng.random(n)
        if self.kind == "uniform":
            return self.low + u * (self.high - self.low)
        if self.kind == "exponential":
            span = self.high - self.low
            return self.low - np.log1p(-u * -np.expm1(-self.lam * span)) / self.lam
        raise ValueError(f"unknown distribution {self.kind!r}")

    def mean(self) -> float:
        if self.kind == "uniform":
            return (self.low + self.high) / 2
        span, lam = self.high - self.low, self.lam
        return self.low + 1 / lam - span * math.exp(-lam * span) / -math.expm1(-lam * span)


@dataclass(frozen=True)
class CsTemplate:
    """A characteristic set: every entity of the template carries all ``predicates``.

    Predicates in ``numeric`` get numeric literal objects; the rest point to
    one of ``fanout`` shared value resources. With ``reified`` set, each
    non-geometry fact gets its own marker plus a confidence quad.
    """

    predicates: tuple[str, ...]
    fraction: float
    numeric: tuple[str, ...] = ()
    reified: bool = False
    fanout: int = 16


@dataclass(frozen=True)
class DatasetSpec:
    n_spatial: int = 1000
    mix: tuple[float, float, float] = (1.0, 0.0, 0.0)  # points, linestrings, polygons
    templates: tuple[CsTemplate, ...] = (CsTemplate(("hasName", "hasType", "hasScore"), 1.0, ("hasScore",)),)
    scores: Distribution = Distribution()
    clustering: str = "uniform"  # "uniform" | "clusters"
    clusters: int = 8
    sigma: float = 0.05
    side: float | None = None
    extent: float = 20.0
    seed: int = 0
    preset: str | None = None  # "benchmark" for the LGD/YAGO-style mix

    def __post_init__(self) -> None:
        if abs(sum(self.mix) - 1.0) > 1e-9:
            raise ValueError("geometry mix fractions must sum to 1")
        if self.preset is None and self.templates and abs(sum(t.fraction for t in self.templates) - 1.0) > 1e-9:
            raise ValueError("template fractions must sum to 1")
        if self.n_spatial < 0:
            raise ValueError("n_spatial must be non-negative")

    @property
    def space_side(self) -> float:
        if self.side is not None:
            return self.side
        return 2000.0 * math.sqrt(max(self.n_spatial, 1) / 1000.0)


# -- geometry sampling ------------------------------------------------------------


def _centres(spec: DatasetSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    side = spec.space_side
    if spec.clustering == "uniform":
        return rng.random((n, 2)) * side
    if spec.clustering == "clusters":
        centres = rng.random((spec.clusters, 2)) * side
        pick = rng.integers(0, spec.clusters, n)
        pts = centres[pick] + rng.normal(0.0, spec.sigma * side, (n, 2))
        return np.clip(pts, 0.0, side)
    raise ValueError(f"unknown clustering {spec.clustering!r}")


def _shapes(spec: DatasetSpec, rng: np.random.Generator, n: int, kinds: np.ndarray | None = None) -> list[Geometry]:
    centres = _centres(spec, rng, n)
    if kinds is None:
        kinds = rng.choice(3, size=n, p=list(spec.mix))
    out = []
    ext = spec.extent
    for (x, y), kind in zip(np.round(centres, 3).tolist(), kinds.tolist()):
        if kind == 0:
            out.append(Geometry.point(x, y))
        elif kind == 1:
            steps = int(rng.integers(1, 4))
            pts = [(x, y)]
            for _ in range(steps):
                dx, dy = np.round(rng.uniform(-ext, ext, 2), 3)
                pts.append((round(pts[-1][0] + dx, 3), round(pts[-1][1] + dy, 3)))
            out.append(Geometry.linestring(pts))
        else:
            sides = int(rng.integers(4, 7))
            radius = float(rng.uniform(ext / 4, ext / 2))
            start = float(rng.uniform(0, 2 * math.pi))
            pts = [
                (round(x + radius * math.cos(start + 2 * math.pi * i / sides), 3),
                 round(y + radius * math.sin(start + 2 * math.pi * i / sides), 3))
                for i in range(sides)
            ]
            out.append(Geometry.polygon(pts + [pts[0]]))
    return out


def _wkt(g: Geometry) -> str:
    return f'"{g.to_wkt()}"^^{WKT_TYPE}'


def _num(v: float) -> str:
    return f'"{v:.6g}"^^xsd:double'


# -- generic spec -----------------------------------------------------------------


def _generic(spec: DatasetSpec) -> Iterator[str]:
    rng = np.random.default_rng(spec.seed)
    n = spec.n_spatial
    geoms = _shapes(spec, rng, n)
    fractions = np.array([t.fraction for t in spec.templates])
    counts = np.floor(fractions * n).astype(int)
    counts[np.argmax(fractions)] += n - counts.sum()
    which = np.repeat(np.arange(len(spec.templates)), counts)
    rng.shuffle(which)
    reif = 0
    for i, (g, ti) in enumerate(zip(geoms, which.tolist())):
        t = spec.templates[ti]
        e = f"<{EX}e{i}>"
        yield f"{e} <{EX}hasGeometry> {_wkt(g)} ."
        for p in t.predicates:
            if p in t.numeric:
                obj = _num(float(spec.scores.sample(rng, 1)[0]))
            else:
                obj = f"<{EX}{p}_v{int(rng.integers(0, t.fanout))}>"
            if t.reified:
                marker = f"<{EX}r{reif}>"
                reif += 1
                yield f"#@ {marker}"
                yield f"{e} <{EX}{p}> {obj} ."
                yield f"{marker} <{EX}hasConfidence> {_num(float(spec.scores.sample(rng, 1)[0]))} ."
            else:
                yield f"{e} <{EX}{p}> {obj} ."


# -- LGD / YAGO-style benchmark mix -----------------------------------------------


def _benchmark(spec: DatasetSpec) -> Iterator[str]:
    rng = np.random.default_rng(spec.seed)
    n = spec.n_spatial
    n_lgd = n // 2
    n_yago = n - n_lgd
    conf = spec.scores
    reif = [0]

    def marker() -> str:
        reif[0] += 1
        return f"<{EX}reif/{reif[0]}>"

    def reified(s: str, p: str, o: str) -> Iterator[str]:
        m = marker()
        yield f"#@ {m}"
        yield f"{s} {p} {o} ."
        yield f"{m} <{YAGO}hasConfidence> {_num(float(conf.sample(rng, 1)[0]))} ."

    # LGD side: typed points, park polygons, road linestrings
    classes = ["uk_points#hotel", "uk_points#police", "uk_points#pub", "uk_natural#park", "uk_roads#roads"]
    kind_of = {0: 0, 1: 0, 2: 0, 3: 2, 4: 1}
    cls = rng.integers(0, len(classes), n_lgd)
    kinds = np.array([kind_of[c] for c in cls.tolist()], dtype=int)
    geoms = _shapes(spec, rng, n_lgd, kinds)
    for i, (c, g) in enumerate(zip(cls.tolist(), geoms)):
        e = f"<http://linkedgeodata.org/triplify/node{i}>"
        yield from reified(e, RDF_TYPE, f"<http://geoknow.eu/{classes[c]}>")
        yield f"{e} <{YAGO}hasGeometry> {_wkt(g)} ."
        if rng.random() < 0.7:
            yield f'{e} {RDFS_LABEL} "label {i}" .'
        if c <= 2 and rng.random() < 0.7:
            yield f'{e} <{LGD_POINTS}name> "name {i}" .'

    # YAGO side: two place templates, then cities, people, events, connections
    places = [f"<{YAGO}place_{i}>" for i in range(n_yago)]
    kinds = rng.choice(3, size=n_yago, p=[0.8, 0.0, 0.2])
    geoms = _shapes(spec, rng, n_yago, kinds)
    template_a = rng.random(n_yago) < 0.5
    a_places = [p for p, a in zip(places, template_a.tolist()) if a] or places
    for i, (p, g, is_a) in enumerate(zip(places, geoms, template_a.tolist())):
        other = places[int(rng.integers(0, n_yago))]
        yield f"{p} <{YAGO}hasGeometry> {_wkt(g)} ."
        yield f"{p} <{YAGO}hasEconomicGrowth> {_num(float(rng.uniform(-5, 10)))} ."
        if is_a:
            yield f"{p} <{YAGO}hasPopulationDensity> {_num(float(rng.uniform(0, 1000)))} ."
            yield f"{p} <{YAGO}hasNeighbor> {places[int(rng.integers(0, n_yago))]} ."
            yield from reified(p, f"<{YAGO}isLocatedIn>", other)
            yield f"{p} <{YAGO}hasInflation> {_num(float(rng.uniform(0, 20)))} ."
        else:
            yield f"{p} <{YAGO}isLocatedIn> {other} ."
            yield f"{p} <{YAGO}hasNumberOfPeople> {_num(float(np.round(rng.exponential(1e4))))} ."
    if not n_yago:
        return
    cities = [f"<{YAGO}city_{i}>" for i in range(max(1, n_yago // 2))]
    for c in cities:
        yield f"{c} <{YAGO}isLocatedIn> {places[int(rng.integers(0, n_yago))]} ."
    for i in range(n_yago):
        person = f"<{YAGO}person_{i}>"
        yield from reified(person, f"<{YAGO}diedIn>", cities[int(rng.integers(0, len(cities)))])
        born = cities[int(rng.integers(0, len(cities)))] if rng.random() < 0.5 else places[int(rng.integers(0, n_yago))]
        yield from reified(person, f"<{YAGO}wasBornIn>", born)
    for i in range(max(1, n_yago // 2)):
        yield from reified(f"<{YAGO}event_{i}>", f"<{YAGO}happenedIn>", a_places[int(rng.integers(0, len(a_places)))])
    for i in range(max(1, n_yago // 4)):
        yield f"<{YAGO}connection_{i}> <{YAGO}isConnectedTo> {places[int(rng.integers(0, n_yago))]} ."


def generate_dataset(spec: DatasetSpec) -> str:
    """Reified input text for ``spec``; byte-identical for a fixed seed."""
    if spec.n_spatial == 0:
        return HEADER
    body = _benchmark(spec) if spec.preset == "benchmark" else _generic(spec)
    return HEADER + "\n".join(body) + "\n"


def benchmark_spec(n_spatial: int = 1000, seed: int = 0, **kw) -> DatasetSpec:
    return DatasetSpec(n_spatial=n_spatial, seed=seed, preset="benchmark", scores=Distribution("exponential", 1.0), **kw)


# -- spec files -------------------------------------------------------------------


def _distribution(text: str) -> Distribution:
    text = text.strip()
    if text.startswith("exponential"):
        arg = text[len("exponential") :].strip("() ")
        return Distribution("exponential", float(arg) if arg else 1.0)
    if text.startswith("uniform"):
        args = [a for a in text[len("uniform") :].strip("() ").split(",") if a.strip()]
        lo, hi = (float(a) for a in args) if args else (0.0, 1.0)
        return Distribution("uniform", low=lo, high=hi)
    raise ValueError(f"unknown distribution {text!r}")


def parse_spec(text: str) -> DatasetSpec:
    """Read a key=value dataset spec.

    Keys: nSpatial, mix (three fractions), seed, scores (``uniform`` or
    ``exponential(l)``), clustering (``uniform`` or ``clusters(c, sigma)``),
    side, extent, preset, and repeated ``template = fraction | p1 p2 ... | numeric ... [| reified]``.
    """
    kw: dict = {}
    templates = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"spec line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "nSpatial":
            kw["n_spatial"] = int(value)
        elif key == "mix":
            kw["mix"] = tuple(float(v) for v in value.split(","))
        elif key == "seed":
            kw["seed"] = int(value)
        elif key == "scores":
            kw["scores"] = _distribution(value)
        elif key == "clustering":
            if value.startswith("clusters"):
                c, s = value[len("clusters") :].strip("() ").split(",")
                kw.update(clustering="clusters", clusters=int(c), sigma=float(s))
            else:
                kw["clustering"] = value
        elif key in ("side", "extent"):
            kw[key] = float(value)
        elif key == "preset":
            kw["preset"] = value
        elif key == "template":
            parts = [p.strip() for p in value.split("|")]
            preds = tuple(parts[1].split())
            numeric = tuple(parts[2].split()) if len(parts) > 2 else ()
            templates.append(
                CsTemplate(preds, float(parts[0]), numeric, reified=len(parts) > 3 and parts[3] == "reified")
            )
        else:
            raise ValueError(f"spec line {lineno}: unknown key {key!r}")
    if templates:
        kw["templates"] = tuple(templates)
    if kw.get("preset") == "benchmark" and "scores" not in kw:
        kw["scores"] = Distribution("exponential", 1.0)
    return DatasetSpec(**kw)

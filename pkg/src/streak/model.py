"""Term dictionary and the quad data model."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import SpatialIdCollision, UnknownId
from .geometry import Geometry, parse_wkt

SPATIAL_BIT = 1 << 63

RDF_NS = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS_NS = "http://www.w3.org/2000/01/rdf-schema#"
XSD_NS = "http://www.w3.org/2001/XMLSchema#"

WELL_KNOWN_PREFIXES = {"rdf": RDF_NS, "rdfs": RDFS_NS, "xsd": XSD_NS}

RDF_SUBJECT = f"<{RDF_NS}subject>"
RDF_PREDICATE = f"<{RDF_NS}predicate>"
RDF_OBJECT = f"<{RDF_NS}object>"
RDF_TYPE = f"<{RDF_NS}type>"
XSD_DOUBLE = f"<{XSD_NS}double>"


class TermKind(str, enum.Enum):
    IRI = "iri"
    STRING = "string-literal"
    NUMERIC = "numeric-literal"
    GEOMETRY = "geometry-literal"


@dataclass(frozen=True)
class Term:
    """An RDF term. Identity is (lexical, kind); the parsed payload rides along."""

    lexical: str
    kind: TermKind = TermKind.IRI
    value: float | None = field(default=None, compare=False)
    geometry: Geometry | None = field(default=None, compare=False)

    def __str__(self) -> str:
        return self.lexical

    @classmethod
    def iri(cls, lexical: str) -> Term:
        return cls(lexical, TermKind.IRI)

    @classmethod
    def number(cls, value: float, lexical: str | None = None) -> Term:
        if lexical is None:
            lexical = f'"{value!r}"^^{XSD_DOUBLE}'
        return cls(lexical, TermKind.NUMERIC, value=float(value))

    @classmethod
    def wkt(cls, lexical: str, geometry: Geometry | None = None) -> Term:
        if geometry is None:
            geometry = parse_wkt(_literal_body(lexical))
        return cls(lexical, TermKind.GEOMETRY, geometry=geometry)


class Quad(NamedTuple):
    reif: int
    s: int
    p: int
    o: int


def is_spatial_id(term_id: int) -> bool:
    return bool(term_id & SPATIAL_BIT)


class Dictionary:
    """Bidirectional term <-> id map.

    Non-spatial ids are dense from zero in first-seen order. Spatial ids are
    minted elsewhere (see :mod:`streak.spatial_id`) and carry bit 63.
    """

    def __init__(self) -> None:
        self._ids: dict[Term, int] = {}
        self._terms: dict[int, Term] = {}
        self.next_non_spatial = 0

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, term: Term) -> bool:
        return term in self._ids

    def intern(self, term: Term, is_spatial: bool = False, spatial_id: int | None = None) -> int:
        existing = self._ids.get(term)
        if existing is not None:
            return existing
        if is_spatial:
            if spatial_id is None:
                raise ValueError("spatial terms need a pre-computed encoded id")
            if not spatial_id & SPATIAL_BIT:
                raise ValueError(f"spatial id {spatial_id:#x} lacks the spatial bit")
            other = self._terms.get(spatial_id)
            if other is not None:
                raise SpatialIdCollision(f"{spatial_id:#x} already bound to {other.lexical}")
            term_id = spatial_id
        else:
            term_id = self.next_non_spatial
            self.next_non_spatial += 1
        self._ids[term] = term_id
        self._terms[term_id] = term
        return term_id

    def lookup(self, term_id: int) -> Term:
        try:
            return self._terms[term_id]
        except KeyError:
            raise UnknownId(term_id) from None

    def id_of(self, term: Term) -> int | None:
        return self._ids.get(term)

    def items(self):
        return self._terms.items()


# -- lexical helpers shared by the data loader and the query parser ---------------

_NUMBER_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_LITERAL_RE = re.compile(r'^"((?:[^"\\]|\\.)*)"(?:\^\^(\S+)|@[A-Za-z\-]+)?$', re.S)


def _literal_body(lexical: str) -> str:
    m = _LITERAL_RE.match(lexical)
    return m.group(1) if m else lexical


def expand_iri(token: str, prefixes: dict[str, str], base: str | None = None) -> str:
    """Canonical lexical form for an IRI or prefixed name.

    Known prefixes expand to ``<full-iri>``; relative ``<x>`` resolves
    against ``base`` when one is set; unknown prefixed names stay verbatim.
    """
    if token.startswith("<") and token.endswith(">"):
        body = token[1:-1]
        if base and ":" not in body:
            return f"<{base}{body}>"
        return token
    if ":" in token and not token.startswith("_:"):
        prefix, local = token.split(":", 1)
        ns = prefixes.get(prefix)
        if ns is None:
            ns = WELL_KNOWN_PREFIXES.get(prefix)
        if ns is not None:
            return f"<{ns}{local}>"
    return token


def term_from_token(token: str, prefixes: dict[str, str], base: str | None = None) -> Term:
    """Build a :class:`Term` from one surface token (IRI, literal, number, name)."""
    if token.startswith('"'):
        m = _LITERAL_RE.match(token)
        if m is None:
            return Term(token, TermKind.STRING)
        body, dtype = m.group(1), m.group(2)
        if dtype is not None:
            dtype = expand_iri(dtype, prefixes, base)
            if dtype == XSD_DOUBLE:
                try:
                    value = float(body)
                except ValueError:
                    return Term(f'"{body}"^^{dtype}', TermKind.STRING)
                return Term(f'"{body}"^^{dtype}', TermKind.NUMERIC, value=value)
            return Term(f'"{body}"^^{dtype}', TermKind.STRING)
        return Term(token, TermKind.STRING)
    if _NUMBER_RE.match(token):
        return Term(token, TermKind.NUMERIC, value=float(token))
    return Term(expand_iri(token, prefixes, base), TermKind.IRI)


def local_name(lexical: str) -> str:
    body = lexical.strip("<>")
    for sep in ("#", "/", ":"):
        if sep in body:
            body = body.rsplit(sep, 1)[1]
    return body


def is_geometry_predicate(lexical: str) -> bool:
    return local_name(lexical) == "hasGeometry"

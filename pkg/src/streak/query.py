"""Parser and component analysis for the supported SPARQL subset."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterator, Union

import numpy as np

from .errors import (
    MissingGeometryBinding,
    MultipleSpatialFilters,
    NotTwoComponents,
    QuerySyntax,
    UnboundRankVariable,
)
from .model import (
    RDF_OBJECT,
    RDF_PREDICATE,
    RDF_SUBJECT,
    RDF_TYPE,
    Term,
    TermKind,
    expand_iri,
    is_geometry_predicate,
    term_from_token,
)

# -- AST --------------------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


Node = Union[Var, Term]


@dataclass(frozen=True)
class TriplePattern:
    s: Node
    p: Node
    o: Node
    reif: Node | None = None

    def vars(self) -> list[str]:
        return [n.name for n in (self.reif, self.s, self.p, self.o) if isinstance(n, Var)]

    @property
    def is_reified(self) -> bool:
        return self.reif is not None


class Expr:
    def vars(self) -> set[str]:
        raise NotImplementedError

    def eval(self, env: dict[str, np.ndarray]) -> np.ndarray:
        raise NotImplementedError

    def interval(self, env: dict[str, tuple[float, float]]) -> tuple[float, float]:
        raise NotImplementedError


@dataclass(frozen=True)
class Num(Expr):
    value: float

    def vars(self) -> set[str]:
        return set()

    def eval(self, env):
        return np.float64(self.value)

    def interval(self, env):
        return (self.value, self.value)

    def __str__(self) -> str:
        return repr(float(self.value))


@dataclass(frozen=True)
class VarRef(Expr):
    name: str

    def vars(self) -> set[str]:
        return {self.name}

    def eval(self, env):
        return env[self.name]

    def interval(self, env):
        return env[self.name]

    def __str__(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr

    def vars(self) -> set[str]:
        return self.operand.vars()

    def eval(self, env):
        return -self.operand.eval(env)

    def interval(self, env):
        lo, hi = self.operand.interval(env)
        return (-hi, -lo)

    def __str__(self) -> str:
        return f"(-{self.operand})"


@dataclass(frozen=True)
class Call(Expr):
    """An uninterpreted unary wrapper such as ``f1(?p)``; evaluated as identity."""

    name: str
    arg: Expr

    def vars(self) -> set[str]:
        return self.arg.vars()

    def eval(self, env):
        return self.arg.eval(env)

    def interval(self, env):
        return self.arg.interval(env)

    def __str__(self) -> str:
        return f"{self.name}({self.arg})"


def _mul_iv(a: tuple[float, float], b: tuple[float, float]) -> tuple[float, float]:
    prods = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]]
    if any(math.isnan(p) for p in prods):
        return (-math.inf, math.inf)
    return (min(prods), max(prods))


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def vars(self) -> set[str]:
        return self.left.vars() | self.right.vars()

    def eval(self, env):
        a, b = self.left.eval(env), self.right.eval(env)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.divide(a, b)

    def interval(self, env):
        a, b = self.left.interval(env), self.right.interval(env)
        if self.op == "+":
            return (a[0] + b[0], a[1] + b[1])
        if self.op == "-":
            return (a[0] - b[1], a[1] - b[0])
        if self.op == "*":
            return _mul_iv(a, b)
        if b[0] <= 0.0 <= b[1]:
            return (-math.inf, math.inf)
        return _mul_iv(a, (1.0 / b[1], 1.0 / b[0]))

    def __str__(self) -> str:
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class RankExpr:
    expr: Expr
    direction: str = "DESC"

    @property
    def descending(self) -> bool:
        return self.direction == "DESC"

    def best(self, iv: tuple[float, float]) -> float:
        """The most favourable end of a score interval."""
        return iv[1] if self.descending else iv[0]

    def worse(self, a: float, b: float) -> bool:
        """True iff score ``a`` is strictly worse than ``b``."""
        return a < b if self.descending else a > b


@dataclass(frozen=True)
class DistanceFilter:
    var_a: str
    var_b: str
    threshold: float


@dataclass(frozen=True)
class Query:
    projection: tuple[str, ...]
    patterns: tuple[TriplePattern, ...]
    filter: DistanceFilter
    rank: RankExpr
    k: int | None = None
    alias: tuple[str, Expr] | None = None

    def limit(self, default: int = 100) -> int:
        return self.k if self.k is not None else default

    def rank_vars(self) -> set[str]:
        return self.rank.expr.vars()

    def quant_patterns(self) -> list[TriplePattern]:
        rv = self.rank_vars()
        return [t for t in self.patterns if isinstance(t.o, Var) and t.o.name in rv]


# -- tokenizer --------------------------------------------------------------------

_TOKENS = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<iri><[^<>"{}|^`\\\s]*>)
  | (?P<var>[?$][A-Za-z_][\w]*)
  | (?P<string>"(?:[^"\\]|\\.)*"(?:\^\^(?:<[^<>\s]*>|(?:[A-Za-z_][\w\-]*)?:[\w\-]*)|@[A-Za-z][\w\-]*)?)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<pname>(?:[A-Za-z_][\w\-]*)?:(?:[\w\-]|\.(?=[\w\-]))*)
  | (?P<word>[A-Za-z_][\w]*)
  | (?P<punct>[{}().,;*/+\-<])
    """,
    re.X,
)

KEYWORDS = {"SELECT", "WHERE", "FILTER", "ORDER", "BY", "ASC", "DESC", "LIMIT", "AS", "PREFIX", "BASE", "DISTINCT"}


@dataclass
class Token:
    kind: str
    text: str
    offset: int

    @property
    def upper(self) -> str:
        return self.text.upper()


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKENS.match(text, pos)
        if m is None:
            raise QuerySyntax(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup or ""
        if kind != "ws":
            out.append(Token(kind, m.group(), pos))
        pos = m.end()
    out.append(Token("eof", "", len(text)))
    return out


# -- parser -----------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.prefixes: dict[str, str] = {}
        self.base: str | None = None

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        t = self.tok
        if t.kind == "word":
            return t.upper == text
        return t.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise QuerySyntax(f"expected {text!r}, found {self.tok.text or 'end of query'!r}", self.tok.offset)
        return self.next()

    # prologue, projection, where, modifiers

    def parse(self) -> tuple:
        while self.at("BASE") or self.at("PREFIX"):
            if self.accept("BASE"):
                t = self.next()
                if t.kind != "iri":
                    raise QuerySyntax("BASE needs an IRI", t.offset)
                self.base = t.text[1:-1]
            else:
                self.next()
                t = self.next()
                if t.kind != "pname" or not t.text.endswith(":"):
                    raise QuerySyntax("PREFIX needs a name ending in ':'", t.offset)
                iri = self.next()
                if iri.kind != "iri":
                    raise QuerySyntax("PREFIX needs an IRI", iri.offset)
                self.prefixes[t.text[:-1]] = iri.text[1:-1]
            self.accept(".")
        self.expect("SELECT")
        self.accept("DISTINCT")
        projection: list[str] = []
        alias = None
        while True:
            t = self.tok
            if t.kind == "var":
                projection.append(self.next().text[1:])
            elif t.text == "*":
                self.next()
                projection.append("*")
            elif t.text == "(":
                self.next()
                expr = self.expr()
                self.expect("AS")
                v = self.next()
                if v.kind != "var":
                    raise QuerySyntax("expected a variable after AS", v.offset)
                self.expect(")")
                if alias is not None:
                    raise QuerySyntax("only one projected expression is supported", t.offset)
                alias = (v.text[1:], expr)
                projection.append(v.text[1:])
            else:
                break
        if not projection:
            raise QuerySyntax("empty projection", self.tok.offset)
        self.accept("WHERE")
        self.expect("{")
        triples: list[tuple[Node, Node, Node]] = []
        filters: list[tuple[DistanceFilter, int]] = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise QuerySyntax("unterminated group", self.tok.offset)
            if self.at("FILTER"):
                off = self.next().offset
                filters.append((self.filter(), off))
            else:
                s = self.term()
                p = self.term(predicate=True)
                o = self.term()
                triples.append((s, p, o))
            self.accept(".")
        self.expect("}")
        rank = None
        if self.accept("ORDER"):
            self.expect("BY")
            direction = "ASC"
            if self.at("ASC") or self.at("DESC"):
                direction = self.next().upper
                self.expect("(")
                expr = self.expr()
                while not self.at(")"):
                    expr = BinOp("+", expr, self.expr())
                self.expect(")")
            else:
                expr = self.primary()
            rank = RankExpr(expr, direction)
        k = None
        if self.accept("LIMIT"):
            t = self.next()
            if t.kind == "number" and re.fullmatch(r"\d+", t.text):
                k = int(t.text)
                if k < 1:
                    raise QuerySyntax("LIMIT must be at least 1", t.offset)
            elif t.kind == "word" and t.text == "k":
                k = None
            else:
                raise QuerySyntax("LIMIT expects an integer or k", t.offset)
        if self.tok.kind != "eof":
            raise QuerySyntax(f"unexpected {self.tok.text!r}", self.tok.offset)
        return projection, alias, triples, filters, rank, k

    def term(self, predicate: bool = False) -> Node:
        t = self.next()
        if t.kind == "var":
            return Var(t.text[1:])
        if t.kind in ("iri", "pname"):
            return Term(expand_iri(t.text, self.prefixes, self.base), TermKind.IRI)
        if t.kind in ("string", "number"):
            return term_from_token(t.text, self.prefixes, self.base)
        if predicate and t.kind == "word" and t.text == "a":
            return Term(RDF_TYPE, TermKind.IRI)
        raise QuerySyntax(f"expected a term, found {t.text or 'end of query'!r}", t.offset)

    def filter(self) -> DistanceFilter:
        self.expect("(")
        if self.tok.kind == "word" and self.tok.text.lower() == "distance":
            self.next()
        self.expect("(")
        a = self.next()
        self.expect(",")
        b = self.next()
        if a.kind != "var" or b.kind != "var":
            raise QuerySyntax("distance filter takes two variables", a.offset)
        self.expect(")")
        self.expect("<")
        t = self.next()
        text = t.text
        if t.kind == "string":
            text = text[1 : text.index('"', 1)]
        try:
            threshold = float(text)
        except ValueError:
            raise QuerySyntax("distance threshold must be numeric", t.offset) from None
        self.expect(")")
        return DistanceFilter(a.text[1:], b.text[1:], threshold)

    # expressions: sum of products of unary factors

    def expr(self) -> Expr:
        left = self.product()
        while self.at("+") or self.at("-"):
            op = self.next().text
            left = BinOp(op, left, self.product())
        return left

    def product(self) -> Expr:
        left = self.unary()
        while self.at("*") or self.at("/"):
            op = self.next().text
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.accept("+"):
            return self.unary()
        if self.accept("-"):
            return Neg(self.unary())
        return self.primary()

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "number":
            self.next()
            return Num(float(t.text))
        if t.kind == "var":
            self.next()
            return VarRef(t.text[1:])
        if t.text == "(":
            self.next()
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "word" and t.upper not in KEYWORDS:
            self.next()
            self.expect("(")
            e = self.expr()
            self.expect(")")
            return Call(t.text, e)
        raise QuerySyntax(f"unexpected {t.text or 'end of query'!r} in expression", t.offset)


def _fuse(triples: list[tuple[Node, Node, Node]]) -> list[TriplePattern]:
    """Collapse rdf:subject/predicate/object groups sharing a statement node."""
    roles = {RDF_SUBJECT: 0, RDF_PREDICATE: 1, RDF_OBJECT: 2}
    groups: dict[Node, list] = {}
    first: dict[Node, int] = {}
    for i, (s, p, o) in enumerate(triples):
        if isinstance(p, Term) and p.lexical in roles:
            slot = groups.setdefault(s, [None, None, None])
            if slot[roles[p.lexical]] is not None:
                raise QuerySyntax(f"statement {s} has two {p.lexical} patterns")
            slot[roles[p.lexical]] = o
            first.setdefault(s, i)
    out: list[TriplePattern] = []
    for i, (s, p, o) in enumerate(triples):
        if isinstance(p, Term) and p.lexical in roles:
            if first[s] != i:
                continue
            parts = groups[s]
            label = s.name if isinstance(s, Var) else f"r{i}"
            filled = [
                parts[j] if parts[j] is not None else Var(f"_{role}_{label}")
                for j, role in enumerate(("s", "p", "o"))
            ]
            out.append(TriplePattern(filled[0], filled[1], filled[2], reif=s))
        else:
            out.append(TriplePattern(s, p, o))
    return out


def parse_query(text: str) -> Query:
    parser = _Parser(text)
    projection, alias, triples, filters, rank, k = parser.parse()
    patterns = _fuse(triples)
    if len(filters) > 1:
        raise MultipleSpatialFilters("only one spatial filter is supported", filters[1][1])
    if not filters:
        raise QuerySyntax("a distance FILTER is required")
    if rank is None:
        raise QuerySyntax("ORDER BY is required for top-k queries")
    if alias is not None:
        rank = RankExpr(_substitute(rank.expr, alias[0], alias[1]), rank.direction)
    flt = filters[0][0]
    geo_objects = {
        t.o.name
        for t in patterns
        if not t.is_reified and isinstance(t.p, Term) and is_geometry_predicate(t.p.lexical) and isinstance(t.o, Var)
    }
    for v in (flt.var_a, flt.var_b):
        if v not in geo_objects:
            raise MissingGeometryBinding(f"?{v} is not bound by a hasGeometry pattern", filters[0][1])
    objects = {t.o.name for t in patterns if isinstance(t.o, Var)}
    for v in sorted(rank.expr.vars()):
        if v not in objects:
            raise UnboundRankVariable(f"rank variable ?{v} is not the object of any pattern")
    return Query(tuple(projection), tuple(patterns), flt, rank, k, alias)


def _substitute(e: Expr, name: str, repl: Expr) -> Expr:
    if isinstance(e, VarRef):
        return repl if e.name == name else e
    if isinstance(e, BinOp):
        return BinOp(e.op, _substitute(e.left, name, repl), _substitute(e.right, name, repl))
    if isinstance(e, Neg):
        return Neg(_substitute(e.operand, name, repl))
    if isinstance(e, Call):
        return Call(e.name, _substitute(e.arg, name, repl))
    return e


# -- unparse ----------------------------------------------------------------------


def _node_text(n: Node) -> str:
    return str(n)


def to_sparql(q: Query) -> str:
    """Pretty-print ``q`` with full IRIs; re-parsing yields an equal AST."""
    head = []
    for v in q.projection:
        if q.alias is not None and v == q.alias[0]:
            head.append(f"({q.alias[1]} AS ?{v})")
        else:
            head.append("*" if v == "*" else f"?{v}")
    lines = [f"SELECT {' '.join(head)}", "WHERE {"]
    for t in q.patterns:
        if t.is_reified:
            r = _node_text(t.reif)
            lines.append(f"  {r} {RDF_SUBJECT} {_node_text(t.s)} .")
            lines.append(f"  {r} {RDF_PREDICATE} {_node_text(t.p)} .")
            lines.append(f"  {r} {RDF_OBJECT} {_node_text(t.o)} .")
        else:
            lines.append(f"  {_node_text(t.s)} {_node_text(t.p)} {_node_text(t.o)} .")
    f = q.filter
    lines.append(f"  FILTER(distance(?{f.var_a}, ?{f.var_b}) < {f.threshold!r})")
    lines.append("}")
    lines.append(f"ORDER BY {q.rank.direction}({q.rank.expr})")
    lines.append(f"LIMIT {q.k if q.k is not None else 'k'}")
    return "\n".join(lines) + "\n"


# -- component analysis -----------------------------------------------------------


@dataclass
class Component:
    geometry_var: str
    entity_var: str
    patterns: list[TriplePattern]
    rank_vars: set[str] = field(default_factory=set)
    self_preds: frozenset[str] = frozenset()
    in_preds: frozenset[str] = frozenset()
    out_preds: frozenset[str] = frozenset()
    estimate: float | None = None

    @property
    def quant_patterns(self) -> list[TriplePattern]:
        return [t for t in self.patterns if isinstance(t.o, Var) and t.o.name in self.rank_vars]

    def vars(self) -> set[str]:
        return {v for t in self.patterns for v in t.vars()}

    def __str__(self) -> str:
        return f"component(?{self.entity_var}, {len(self.patterns)} patterns)"


def _const_pred(t: TriplePattern) -> str | None:
    return t.p.lexical if isinstance(t.p, Term) else None


def _preds_of_subject(patterns: list[TriplePattern], name: str) -> frozenset[str]:
    out = set()
    for t in patterns:
        if isinstance(t.s, Var) and t.s.name == name and _const_pred(t):
            out.add(_const_pred(t))
    return frozenset(out)


def split_driver_driven(q: Query) -> tuple[Component, Component]:
    """The two pattern components joined by the distance filter, in query order."""
    parent: dict[str, str] = {}

    def find(v: str) -> str:
        while parent.setdefault(v, v) != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for t in q.patterns:
        vs = t.vars()
        for v in vs:
            find(v)
        for a, b in zip(vs, vs[1:]):
            parent[find(a)] = find(b)
    ga, gb = q.filter.var_a, q.filter.var_b
    if find(ga) == find(gb):
        raise NotTwoComponents("both filter variables lie in one connected component")
    roots = {find(v) for t in q.patterns for v in t.vars()}
    if len(roots) != 2:
        raise NotTwoComponents(f"expected two pattern components, found {len(roots)}")
    rank_vars = q.rank_vars()
    comps = []
    for g in (ga, gb):
        pats = [t for t in q.patterns if t.vars() and find(t.vars()[0]) == find(g)]
        ent = None
        for t in pats:
            if (
                not t.is_reified
                and isinstance(t.o, Var)
                and t.o.name == g
                and isinstance(t.p, Term)
                and is_geometry_predicate(t.p.lexical)
            ):
                if isinstance(t.s, Var):
                    ent = t.s.name
                break
        if ent is None:
            raise MissingGeometryBinding(f"?{g} has no variable geometry subject")
        in_preds: frozenset[str] = frozenset()
        out_preds: frozenset[str] = frozenset()
        for t in pats:
            if isinstance(t.o, Var) and t.o.name == ent and isinstance(t.s, Var) and not in_preds:
                in_preds = _preds_of_subject(pats, t.s.name)
            if isinstance(t.s, Var) and t.s.name == ent and isinstance(t.o, Var) and not out_preds:
                out_preds = _preds_of_subject(pats, t.o.name)
        comps.append(
            Component(
                geometry_var=g,
                entity_var=ent,
                patterns=pats,
                rank_vars={v for v in rank_vars if any(v in t.vars() for t in pats)},
                self_preds=_preds_of_subject(pats, ent),
                in_preds=in_preds,
                out_preds=out_preds,
            )
        )
    return comps[0], comps[1]


def iter_vars(patterns: list[TriplePattern]) -> Iterator[str]:
    seen = set()
    for t in patterns:
        for v in t.vars():
            if v not in seen:
                seen.add(v)
                yield v

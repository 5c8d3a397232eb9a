"""Plan construction for both join sides and the adaptive cost model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .bindings import resolve
from .model import Term
from .query import Component, TriplePattern, Var
from .squadtree import CsQuery
from .store import QuadStore, best_ordering

# -- operators --------------------------------------------------------------------


@dataclass
class IndexScan:
    pattern: TriplePattern
    ordering: str
    estimate: float = 0.0

    def label(self) -> str:
        return f"IndexScan[{self.ordering}] {_pattern_text(self.pattern)}"


@dataclass
class NumericBlockScan:
    pattern: TriplePattern
    predicate: int
    descending: bool = True

    def label(self) -> str:
        way = "desc" if self.descending else "asc"
        return f"NumericBlockScan[{way}] {_pattern_text(self.pattern)}"


@dataclass
class SipSpatialProbe:
    geometry: TriplePattern
    entity_var: str
    child: Operator | None = None

    def label(self) -> str:
        return f"SipSpatialProbe ?{self.entity_var}"


@dataclass
class MergeJoin:
    var: str
    left: Operator
    right: Operator

    def label(self) -> str:
        return f"MergeJoin ?{self.var}"


@dataclass
class HashJoin:
    var: str
    left: Operator
    right: Operator

    def label(self) -> str:
        return f"HashJoin ?{self.var}"


Operator = Union[IndexScan, NumericBlockScan, SipSpatialProbe, MergeJoin, HashJoin]


def _pattern_text(t: TriplePattern) -> str:
    parts = [str(t.s), str(t.p), str(t.o)]
    if t.reif is not None:
        parts.insert(0, f"{t.reif}:")
    return " ".join(parts)


@dataclass
class PhysicalPlan:
    """A left-deep operator tree plus the flat pattern order the executor follows."""

    root: Operator
    role: str  # "driver" | "drivenN" | "drivenS"
    component: Component
    lead: NumericBlockScan | None
    steps: list[TriplePattern]
    numeric_vars: frozenset[str] = frozenset()

    def explain(self) -> str:
        lines: list[str] = []

        def walk(op: Operator, depth: int) -> None:
            lines.append("  " * depth + op.label())
            if isinstance(op, (MergeJoin, HashJoin)):
                walk(op.left, depth + 1)
                walk(op.right, depth + 1)
            elif isinstance(op, SipSpatialProbe) and op.child is not None:
                walk(op.child, depth + 1)

        walk(self.root, 0)
        return f"{self.role}:\n" + "\n".join(lines)


@dataclass(frozen=True)
class CostEstimate:
    time: float
    cardinality: float
    x: int = 0

    @property
    def total(self) -> float:
        return self.time

    def __post_init__(self) -> None:
        if self.time < 0 or self.cardinality < 0:
            raise ValueError("cost estimates are non-negative")


# -- statistics -------------------------------------------------------------------


def pattern_count(store: QuadStore, t: TriplePattern) -> int:
    positions = (t.reif, t.s, t.p, t.o)
    const = []
    for n in positions:
        if n is None or isinstance(n, Var):
            const.append(None)
        else:
            tid = resolve(store, n)
            if tid is None:
                return 0
            const.append(tid)
    return store.count(const)


def cs_entity_count(store: QuadStore, preds) -> int:
    """Distinct subjects carrying every predicate in ``preds``."""
    subjects = None
    for lex in sorted(preds):
        pid = store.dictionary.id_of(Term(lex))
        if pid is None:
            return 0
        subs = np.unique(store.scan((None, None, pid, None), "PSO").remaining()[:, 1])
        subjects = subs if subjects is None else np.intersect1d(subjects, subs, assume_unique=True)
    return 0 if subjects is None else len(subjects)


def estimate_component(store: QuadStore, comp: Component) -> float:
    counts = [pattern_count(store, t) for t in comp.patterns]
    est = float(min(counts)) if counts else 0.0
    if comp.self_preds:
        est = min(est, float(cs_entity_count(store, comp.self_preds)))
    comp.estimate = est
    return est


def cs_query(store: QuadStore, comp: Component) -> CsQuery:
    def ids(lexicals) -> frozenset[int]:
        out = set()
        for lex in lexicals:
            pid = store.dictionary.id_of(Term(lex))
            # a predicate missing from the data can never match; keep a sentinel
            out.add(pid if pid is not None else -1)
        return frozenset(out)

    return CsQuery(ids(comp.self_preds), ids(comp.in_preds), ids(comp.out_preds))


def value_range(store: QuadStore, t: TriplePattern) -> tuple[float, float]:
    if isinstance(t.p, Term):
        pid = resolve(store, t.p)
        if pid is None:
            return (math.inf, -math.inf)
        r = store.value_range(pid)
        return r if r is not None else (math.inf, -math.inf)
    return (-math.inf, math.inf)


def var_ranges(store: QuadStore, comp: Component) -> dict[str, tuple[float, float]]:
    out: dict[str, tuple[float, float]] = {}
    for t in comp.quant_patterns:
        lo, hi = value_range(store, t)
        name = t.o.name  # type: ignore[union-attr]
        if name in out:
            plo, phi = out[name]
            lo, hi = max(lo, plo), min(hi, phi)
        out[name] = (lo, hi)
    return out


# -- planning ---------------------------------------------------------------------


def choose_driver(components: tuple[Component, Component], store: QuadStore | None = None) -> tuple[Component, Component]:
    """Smaller estimated cardinality drives; ties go to more quantifiable patterns, then query order."""
    a, b = components
    if store is not None:
        estimate_component(store, a)
        estimate_component(store, b)
    ea = a.estimate if a.estimate is not None else math.inf
    eb = b.estimate if b.estimate is not None else math.inf
    if eb < ea or (eb == ea and len(b.quant_patterns) > len(a.quant_patterns)):
        return b, a
    return a, b


def _lead_candidates(comp: Component) -> list[TriplePattern]:
    return [
        t
        for t in comp.quant_patterns
        if not t.is_reified and isinstance(t.p, Term) and isinstance(t.o, Var) and not isinstance(t.s, Term)
    ]


def pick_lead(store: QuadStore, comp: Component) -> TriplePattern | None:
    """Quant pattern to scan first: the one with the widest value spread."""
    best, best_spread = None, -math.inf
    for t in _lead_candidates(comp):
        lo, hi = value_range(store, t)
        spread = hi - lo if hi >= lo else -1.0
        if spread > best_spread:
            best, best_spread = t, spread
    return best


def _order_rest(
    store: QuadStore,
    patterns: list[TriplePattern],
    bound: set[str],
    last: list[TriplePattern] | None = None,
) -> list[TriplePattern]:
    """Greedy connected order by ascending scan cardinality; ``last`` goes after the rest when possible."""
    counts = {id(t): pattern_count(store, t) for t in patterns}
    deferred = {id(t) for t in (last or [])}
    left = list(patterns)
    out: list[TriplePattern] = []
    bound = set(bound)
    while left:
        connected = [t for t in left if bound & set(t.vars())] or left
        preferred = [t for t in connected if id(t) not in deferred] or connected
        nxt = min(preferred, key=lambda t: counts[id(t)])
        out.append(nxt)
        left.remove(nxt)
        bound |= set(nxt.vars())
    return out


def _join_tree(leaf: Operator, leaf_vars: set[str], steps: list[TriplePattern], sorted_var: str | None) -> Operator:
    root = leaf
    bound = set(leaf_vars)
    for t in steps:
        shared = [v for v in t.vars() if v in bound]
        var = shared[0] if shared else "*"
        scan = IndexScan(t, best_ordering([None if isinstance(n, Var) or n is None else 0 for n in (t.reif, t.s, t.p, t.o)]))
        if sorted_var is not None and var == sorted_var and root is leaf:
            root = MergeJoin(var, root, scan)
        else:
            root = HashJoin(var, root, scan)
        bound |= set(t.vars())
    return root


def _block_plan(store: QuadStore, comp: Component, descending: bool, role: str) -> PhysicalPlan:
    lead = pick_lead(store, comp)
    numeric = frozenset(comp.rank_vars)
    if lead is None:
        steps = _order_rest(store, comp.patterns, set())
        first = steps[0]
        leaf: Operator = IndexScan(first, "PSO", pattern_count(store, first))
        root = _join_tree(leaf, set(first.vars()), steps[1:], None)
        return PhysicalPlan(root, role, comp, None, steps, numeric)
    pid = resolve(store, lead.p)
    block = NumericBlockScan(lead, pid if pid is not None else -1, descending)
    rest = [t for t in comp.patterns if t is not lead]
    steps = _order_rest(store, rest, set(lead.vars()))
    root = _join_tree(block, set(lead.vars()), steps, None)
    return PhysicalPlan(root, role, comp, block, [lead] + steps, numeric)


def optimize_driver(store: QuadStore, comp: Component, descending: bool = True) -> PhysicalPlan:
    return _block_plan(store, comp, descending, "driver")


def build_n_plan(store: QuadStore, comp: Component, descending: bool = True) -> PhysicalPlan:
    plan = _block_plan(store, comp, descending, "drivenN")
    geo = _geometry_pattern(comp)
    plan.root = SipSpatialProbe(geo, comp.entity_var, plan.root)
    return plan


def build_s_plan(store: QuadStore, comp: Component) -> PhysicalPlan:
    geo = _geometry_pattern(comp)
    rest = [t for t in comp.patterns if t is not geo]
    steps = _order_rest(store, rest, {comp.entity_var, comp.geometry_var}, last=comp.quant_patterns)
    leaf = SipSpatialProbe(geo, comp.entity_var)
    root = _join_tree(leaf, {comp.entity_var, comp.geometry_var}, steps, comp.entity_var)
    return PhysicalPlan(root, "drivenS", comp, None, [geo] + steps, frozenset(comp.rank_vars))


def _geometry_pattern(comp: Component) -> TriplePattern:
    for t in comp.patterns:
        if isinstance(t.o, Var) and t.o.name == comp.geometry_var and not t.is_reified:
            return t
    raise ValueError("component has no geometry pattern")


# -- cost model -------------------------------------------------------------------


@dataclass
class CostContext:
    """Inputs of the adaptive cost model for one driver block.

    ``block_bounds`` holds, per driven numeric block, the best score any row
    built from it could reach; ``theta`` is ``None`` until k rows exist.
    """

    block_bounds: list[float]
    c_r: float
    t_ri: float
    t_r: float
    driver_block_size: int
    theta: float | None = None
    descending: bool = True
    join_factor: float = 1.0
    pair_time: float = 1.0

    @property
    def nb(self) -> int:
        return max(1, len(self.block_bounds))

    @property
    def x(self) -> int:
        if self.theta is None:
            return len(self.block_bounds)
        if self.descending:
            return sum(1 for b in self.block_bounds if not b < self.theta)
        return sum(1 for b in self.block_bounds if not b > self.theta)


def partial_cardinality(x: int, c_r: float, nb: int) -> float:
    """C(R_i) = x * C(R) / nb, assuming every block contributes equally."""
    return x * c_r / max(nb, 1)


def n_plan_time(x: int, t_ri: float, t_r: float, nb: int) -> float:
    return x * t_ri if x < nb else t_r


def estimate_cost(kind: str, ctx: CostContext) -> CostEstimate:
    x, nb = ctx.x, ctx.nb
    if kind == "nplan":
        card = partial_cardinality(x, ctx.c_r, nb)
        time = n_plan_time(x, ctx.t_ri, ctx.t_r, nb)
    elif kind == "splan":
        card = ctx.c_r
        time = ctx.t_r
    else:
        raise ValueError(f"unknown plan kind {kind!r}")
    total = time + ctx.join_factor * card * ctx.driver_block_size * ctx.pair_time
    return CostEstimate(total, card, x)


def cheaper_plan(ctx: CostContext) -> tuple[str, CostEstimate, CostEstimate]:
    """Argmin of the two driven plans; an exact tie goes to the S-Plan."""
    n = estimate_cost("nplan", ctx)
    s = estimate_cost("splan", ctx)
    return ("nplan" if n.time < s.time else "splan"), n, s

"""Block-wise top-k execution with sideways information passing and adaptive driven plans."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import spatial_id
from .bindings import Table, concat, join, scan_pattern
from .config import EngineConfig
from .geometry import exact_distance
from .model import Term
from .node_select import SelectionResult, select_optimal
from .planner import (
    CostContext,
    PhysicalPlan,
    build_n_plan,
    build_s_plan,
    cheaper_plan,
    choose_driver,
    cs_query,
    optimize_driver,
    pattern_count,
    var_ranges,
)
from .query import Component, Query, RankExpr, TriplePattern, Var, split_driver_driven
from .rtree import str_bulk_load, sync_traversal_join
from .squadtree import SQuadTree, SQuadTreeNode, candidate_nodes, contains_many, mbr_distance_many
from .store import S, Cursor, NumericBlock, QuadStore

PLAN_MODES = ("aps", "nplan", "splan", "alternate")
JOIN_ALGOS = ("squad", "rtree")


# -- result types -----------------------------------------------------------------


@dataclass
class ResultRow:
    bindings: dict[str, Term]
    score: float
    ids: dict[str, int] = field(default_factory=dict, repr=False)


@dataclass
class TraceEntry:
    block: int
    plan: str
    x: int = 0
    nb: int = 0
    cost_n: float = 0.0
    cost_s: float = 0.0
    theta: float | None = None


@dataclass
class ExecStats:
    driver_blocks: int = 0
    driver_blocks_total: int = 0
    driven_blocks_fetched: int = 0
    driven_block_visits: int = 0
    candidates: int = 0
    verified: int = 0
    sip_total: int = 0
    sip_passed: int = 0
    early_terminated: bool = False
    trace: list[TraceEntry] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def sip_skipped(self) -> int:
        return self.sip_total - self.sip_passed

    def plan_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for t in self.trace:
            out[t.plan] = out.get(t.plan, 0) + 1
        return out


class TopKState:
    """The k best rows seen so far under (score, binding ids) order."""

    def __init__(self, k: int, rank: RankExpr, var_order: Sequence[str]):
        self.k = k
        self.rank = rank
        self.var_order = list(var_order)
        self.rows = Table.empty(self.var_order)
        self.scores = np.zeros(0)

    def __len__(self) -> int:
        return len(self.rows)

    def _order(self, rows: Table, scores: np.ndarray) -> np.ndarray:
        primary = -scores if self.rank.descending else scores
        keys = [rows.cols[v] for v in reversed(self.var_order)] + [primary]
        return np.lexsort(keys)

    def offer(self, rows: Table, scores: np.ndarray) -> None:
        if not len(rows):
            return
        merged = concat([self.rows, rows], self.var_order)
        all_scores = np.concatenate([self.scores, scores])
        order = self._order(merged, all_scores)[: self.k]
        self.rows = merged.take(order)
        self.scores = all_scores[order]

    @property
    def full(self) -> bool:
        return len(self.rows) >= self.k

    @property
    def theta(self) -> float | None:
        """Score of the k-th row, or ``None`` while fewer than k rows exist."""
        return float(self.scores[self.k - 1]) if self.full else None

    def cannot_beat(self, bound: float) -> bool:
        t = self.theta
        return t is not None and self.rank.worse(bound, t)


@dataclass
class MaterializationPoint:
    """State carried across driver blocks: driven-block cache and verified-pair memo."""

    driver_block: int = 0
    driven_blocks: dict[int, Table] = field(default_factory=dict)
    verified_pairs: dict[tuple[int, int], bool] = field(default_factory=dict)
    n_seconds: list[float] = field(default_factory=list)
    s_seconds: list[float] = field(default_factory=list)
    pair_seconds: list[float] = field(default_factory=list)


# -- phase 2: sideways information passing ----------------------------------------


@dataclass
class SipResult:
    rows: np.ndarray
    total: int

    @property
    def passed(self) -> int:
        return len(self.rows)

    @property
    def skipped(self) -> int:
        return self.total - len(self.rows)


def _v_star_nodes(v_star) -> list[SQuadTreeNode]:
    return list(v_star.v_star) if isinstance(v_star, SelectionResult) else list(v_star)


def membership(nodes: Sequence[SQuadTreeNode], ids: np.ndarray) -> np.ndarray:
    mask = np.zeros(len(ids), dtype=bool)
    for node in nodes:
        mask |= contains_many(node, ids)
    return mask


def sip_filter(cursor: Cursor, v_star) -> SipResult:
    """Keep scan rows whose leading spatial id belongs to some V* node.

    I-Ranges are visited in id order with ``skip_to`` so whole gaps are never
    read; E-List members are looked up individually.
    """
    nodes = _v_star_nodes(v_star)
    total = len(cursor)
    ranges = sorted((node.i_range.lo, node.i_range.hi, node.level) for node in nodes)
    lead = cursor._lead
    rows_all = cursor._rows
    parts = []
    for lo, hi, level in ranges:
        cursor.skip_to(lo)
        chunk = cursor.take_until(hi)
        if len(chunk):
            keep = (chunk[:, S] & np.uint64(spatial_id.L_MASK)) >= np.uint64(level)
            parts.append(chunk[keep])
    elist = np.unique(np.concatenate([n.e_list for n in nodes])) if nodes else np.zeros(0, np.uint64)
    if len(elist) and lead is not None and len(lead):
        lo = np.searchsorted(lead, elist, side="left")
        hi = np.searchsorted(lead, elist, side="right")
        idx = np.concatenate([np.arange(a, b) for a, b in zip(lo, hi) if b > a] or [np.zeros(0, np.int64)])
        parts.append(rows_all[idx.astype(np.int64)])
    if not parts:
        return SipResult(rows_all[:0], total)
    rows = np.concatenate(parts)
    if len(rows) > 1:
        rows = np.unique(rows, axis=0)
        rows = rows[np.argsort(rows[:, S], kind="stable")]
    return SipResult(rows, total)


# -- phase 3 and refinement --------------------------------------------------------


def _boxes_of(store: QuadStore, ids: np.ndarray) -> np.ndarray:
    pos = np.searchsorted(store.spatial_ids, ids)
    return store.spatial_mbrs[pos]


def _emit_pairs(a_mbrs: np.ndarray, b_mbrs: np.ndarray, d: float) -> tuple[np.ndarray, np.ndarray]:
    dx = np.maximum(0.0, np.maximum(a_mbrs[:, None, 0] - b_mbrs[None, :, 2], b_mbrs[None, :, 0] - a_mbrs[:, None, 2]))
    dy = np.maximum(0.0, np.maximum(a_mbrs[:, None, 1] - b_mbrs[None, :, 3], b_mbrs[None, :, 1] - a_mbrs[:, None, 3]))
    return np.nonzero(np.hypot(dx, dy) <= d)


def spatial_join_block(
    driver_ids: np.ndarray,
    driver_mbrs: np.ndarray,
    driven_ids: np.ndarray,
    driven_mbrs: np.ndarray,
    start_nodes: Sequence[SQuadTreeNode],
    d: float,
) -> np.ndarray:
    """Simultaneous descent from ``start_nodes``; returns deduplicated (driver, driven) id pairs.

    Descent stops at nodes whose MBR diagonal is at most ``d`` or at leaves;
    there every surviving pair whose MBRs lie within ``d`` becomes a candidate.
    """
    if not len(driver_ids) or not len(driven_ids):
        return np.zeros((0, 2), dtype=np.uint64)
    found: list[np.ndarray] = []
    nb = len(driven_ids)
    stack: list[tuple[SQuadTreeNode, np.ndarray, np.ndarray]] = []
    for node in start_nodes:
        if node.mbr is None:
            continue
        a = np.flatnonzero(mbr_distance_many(driver_mbrs, node.mbr) <= d)
        b = np.flatnonzero(_in_cell(driven_mbrs, node.cell))
        stack.append((node, a, b))
    while stack:
        node, a, b = stack.pop()
        if not len(a) or not len(b):
            continue
        if node.is_leaf or node.mbr.diagonal <= d:
            li, ri = _emit_pairs(driver_mbrs[a], driven_mbrs[b], d)
            if len(li):
                found.append(a[li].astype(np.int64) * nb + b[ri])
            continue
        for child in node.child_nodes():
            if child.mbr is None:
                continue
            ca = a[mbr_distance_many(driver_mbrs[a], child.mbr) <= d]
            cb = b[_in_cell(driven_mbrs[b], child.cell)]
            if len(ca) and len(cb):
                stack.append((child, ca, cb))
    if not found:
        return np.zeros((0, 2), dtype=np.uint64)
    codes = np.unique(np.concatenate(found))
    return np.stack([driver_ids[codes // nb], driven_ids[codes % nb]], axis=1)


def _in_cell(boxes: np.ndarray, cell) -> np.ndarray:
    return (
        (boxes[:, 2] >= cell.minx)
        & (boxes[:, 0] < cell.maxx)
        & (boxes[:, 3] >= cell.miny)
        & (boxes[:, 1] < cell.maxy)
    )


def refine(
    candidates: np.ndarray,
    d: float,
    store: QuadStore,
    memo: dict[tuple[int, int], bool] | None = None,
) -> np.ndarray:
    """Pairs whose exact geometries are strictly closer than ``d``."""
    if not len(candidates):
        return candidates
    memo = {} if memo is None else memo
    keep = np.zeros(len(candidates), dtype=bool)
    geo = store.geometry_of
    for i, (a, b) in enumerate(candidates.tolist()):
        hit = memo.get((a, b))
        if hit is None:
            hit = memo[(a, b)] = exact_distance(geo[a], geo[b]) < d
        keep[i] = hit
    return candidates[keep]


# -- the pipeline ------------------------------------------------------------------


@dataclass
class _Side:
    comp: Component
    blocks: list[NumericBlock | None]
    bounds: list[float]
    lead_var: str | None
    ranges: dict[str, tuple[float, float]]


class TopKExecution:
    def __init__(
        self,
        query: Query,
        store: QuadStore,
        tree: SQuadTree | None,
        config: EngineConfig | None = None,
        plan: str = "aps",
        join_algo: str = "squad",
        k: int | None = None,
    ):
        if plan not in PLAN_MODES:
            raise ValueError(f"plan must be one of {PLAN_MODES}")
        if join_algo not in JOIN_ALGOS:
            raise ValueError(f"join algorithm must be one of {JOIN_ALGOS}")
        if join_algo == "squad" and tree is None:
            raise ValueError("the S-QuadTree join needs a tree")
        self.q = query
        self.store = store
        self.tree = tree
        self.cfg = config or EngineConfig()
        self.plan_mode = plan
        self.join_algo = join_algo
        self.k = k if k is not None else query.limit(self.cfg.default_k)
        self.rank = query.rank
        self.d = query.filter.threshold
        self.stats = ExecStats()
        self.mp = MaterializationPoint()

        driver, driven = choose_driver(split_driver_driven(query), store)
        self.driver, self.driven = driver, driven
        desc = self.rank.descending
        self.driver_plan: PhysicalPlan = optimize_driver(store, driver, desc)
        self.n_plan: PhysicalPlan = build_n_plan(store, driven, desc)
        self.s_plan: PhysicalPlan = build_s_plan(store, driven)
        self.numeric_vars = frozenset(query.rank_vars())
        self.var_order = sorted(driver.vars() | driven.vars())
        self.topk = TopKState(self.k, self.rank, self.var_order)
        self._scans: dict[int, Table] = {}
        self.cs = cs_query(store, driven)
        self.cs_ids = tree.matching_cs(self.cs)["self"] if tree is not None else frozenset()
        self.ranges = {**var_ranges(store, driver), **var_ranges(store, driven)}
        self.drv = self._side(driver, self.driver_plan)
        self.dvn = self._side(driven, self.n_plan)
        self.c_r = float(driven.estimate or 0.0)
        self._geo_cursor_rows = None
        self._rtree_all = None
        self._s_units = float(sum(pattern_count(store, t) for t in self.s_plan.steps)) or 1.0

    # pattern tables are computed once per query and reused by every block

    def _scan(self, t: TriplePattern) -> Table:
        hit = self._scans.get(id(t))
        if hit is None:
            hit = self._scans[id(t)] = scan_pattern(self.store, t, self.numeric_vars)
        return hit

    def _bound(self, env_overrides: dict[str, tuple[float, float]]) -> float:
        env = dict(self.ranges)
        env.update(env_overrides)
        for v in self.rank.expr.vars():
            env.setdefault(v, (-math.inf, math.inf))
        return self.rank.best(self.rank.expr.interval(env))

    def _side(self, comp: Component, plan: PhysicalPlan) -> _Side:
        if plan.lead is None:
            return _Side(comp, [None], [self._bound({})], None, {})
        lead_var = plan.lead.pattern.o.name  # type: ignore[union-attr]
        blocks = self.store.numeric_blocks(plan.lead.predicate, self.cfg.block_size)
        bounds = [self._bound({lead_var: (b.min_val, b.max_val)}) for b in blocks]
        order = sorted(range(len(blocks)), key=lambda i: -bounds[i] if self.rank.descending else bounds[i])
        return _Side(comp, [blocks[i] for i in order], [bounds[i] for i in order], lead_var, {})

    def _block_table(self, plan: PhysicalPlan, block: NumericBlock | None) -> Table:
        if block is None:
            steps = plan.steps
            table = self._scan(steps[0])
            rest = steps[1:]
        else:
            lead = plan.lead.pattern  # type: ignore[union-attr]
            cols = {}
            if isinstance(lead.s, Var):
                cols[lead.s.name] = block.subjects
            cols[lead.o.name] = block.objects  # type: ignore[union-attr]
            table = Table(cols, block.count)
            rest = plan.steps[1:]
        for t in rest:
            table = join(table, self._scan(t))
            if not len(table):
                break
        return table

    def _interval_env(self, table: Table, comp: Component) -> dict[str, tuple[float, float]]:
        env = {}
        for v in comp.rank_vars:
            if v in table.cols and len(table):
                vals, _ = self.store.numeric_values(table.cols[v])
                env[v] = (float(vals.min()), float(vals.max()))
        return env

    # -- spatial join per block -----------------------------------------------

    def _join_objects(self, a_ids: np.ndarray, b_ids: np.ndarray, v_star: SelectionResult | None) -> np.ndarray:
        a_boxes = _boxes_of(self.store, a_ids)
        b_boxes = _boxes_of(self.store, b_ids)
        t0 = time.perf_counter()
        if self.join_algo == "rtree":
            fan = self.cfg.rtree_fanout
            cand = sync_traversal_join(str_bulk_load(a_ids, a_boxes, fan), str_bulk_load(b_ids, b_boxes, fan), self.d).pairs
        else:
            cand = spatial_join_block(a_ids, a_boxes, b_ids, b_boxes, v_star.v_star if v_star else [], self.d)
        self.stats.candidates += len(cand)
        verified = refine(cand, self.d, self.store, self.mp.verified_pairs)
        self.stats.verified += len(verified)
        work = max(1, len(a_ids) * len(b_ids))
        self.mp.pair_seconds.append((time.perf_counter() - t0) / work)
        return verified

    def _emit(self, driver_rows: Table, pairs: np.ndarray, driven_rows: Table) -> None:
        if not len(pairs) or not len(driven_rows):
            return
        link = Table({self.driver.entity_var: pairs[:, 0], self.driven.entity_var: pairs[:, 1]}, len(pairs))
        rows = join(join(driver_rows, link), driven_rows)
        if not len(rows):
            return
        env = {}
        for v in self.rank.expr.vars():
            env[v], _ = self.store.numeric_values(rows.cols[v])
        scores = np.broadcast_to(np.asarray(self.rank.expr.eval(env), dtype=np.float64), (len(rows),))
        self.topk.offer(rows, np.array(scores))

    def _driven_block(self, j: int) -> Table:
        hit = self.mp.driven_blocks.get(j)
        if hit is None:
            hit = self.mp.driven_blocks[j] = self._block_table(self.n_plan, self.dvn.blocks[j])
            self.stats.driven_blocks_fetched += 1
        return hit

    def _run_n_plan(self, drv_rows: Table, a_ids: np.ndarray, v_star, drv_env) -> None:
        ev = self.driven.entity_var
        for j, block in enumerate(self.dvn.blocks):
            env = dict(drv_env)
            if self.dvn.lead_var is not None and block is not None:
                env[self.dvn.lead_var] = (block.min_val, block.max_val)
            if self.topk.cannot_beat(self._bound(env)):
                continue
            t0 = time.perf_counter()
            rows = self._driven_block(j)
            self.stats.driven_block_visits += 1
            if len(rows) and v_star is not None:
                rows = rows.filter(membership(v_star.v_star, rows.cols[ev]))
            self.mp.n_seconds.append(time.perf_counter() - t0)
            if not len(rows):
                continue
            b_ids = np.unique(rows.cols[ev])
            pairs = self._join_objects(a_ids, b_ids, v_star)
            self._emit(drv_rows, pairs, rows)

    def _geometry_cursor(self) -> Cursor:
        geo = self.s_plan.steps[0]
        pid = self.store.dictionary.id_of(geo.p)  # type: ignore[arg-type]
        return self.store.scan((None, None, pid if pid is not None else -1, None), "PSO")

    def _run_s_plan(self, drv_rows: Table, a_ids: np.ndarray, v_star) -> None:
        ev, gv = self.driven.entity_var, self.driven.geometry_var
        t0 = time.perf_counter()
        cursor = self._geometry_cursor()
        if self.join_algo == "squad":
            sip = sip_filter(cursor, v_star)
            self.stats.sip_total += sip.total
            self.stats.sip_passed += sip.passed
            geo_rows = sip.rows
            if len(geo_rows):
                cs = self.tree.self_cs_of(geo_rows[:, S])  # type: ignore[union-attr]
                geo_rows = geo_rows[np.isin(cs, np.fromiter(self.cs_ids, dtype=np.int64))]
        else:
            geo_rows = cursor.remaining()
        seed = Table({ev: geo_rows[:, S], gv: geo_rows[:, 3]}, len(geo_rows))
        b_ids = np.unique(seed.cols[ev])
        if self.join_algo == "squad":
            driven_rows = self._extend(seed)
            b_ids = np.unique(driven_rows.cols[ev]) if len(driven_rows) else b_ids[:0]
            self.mp.s_seconds.append(time.perf_counter() - t0)
            pairs = self._join_objects(a_ids, b_ids, v_star)
        else:
            self.mp.s_seconds.append(time.perf_counter() - t0)
            pairs = self._join_objects(a_ids, b_ids, v_star)
            keep = np.unique(pairs[:, 1]) if len(pairs) else b_ids[:0]
            driven_rows = self._extend(seed.restrict(ev, keep))
        self._emit(drv_rows, pairs, driven_rows)

    def _extend(self, seed: Table) -> Table:
        table = seed
        for t in self.s_plan.steps[1:]:
            if not len(table):
                break
            table = join(table, self._scan(t))
        return table

    # -- adaptive choice ------------------------------------------------------

    def _cost_context(self, drv_env, block_size: int) -> CostContext:
        bounds = []
        for block in self.dvn.blocks:
            env = dict(drv_env)
            if self.dvn.lead_var is not None and block is not None:
                env[self.dvn.lead_var] = (block.min_val, block.max_val)
            bounds.append(self._bound(env))
        nb = max(1, len(bounds))
        mp = self.mp
        n_avg = float(np.mean(mp.n_seconds)) if mp.n_seconds else None
        s_avg = float(np.mean(mp.s_seconds)) if mp.s_seconds else None
        if n_avg is None and s_avg is None:
            t_r, t_ri, pair = self._s_units, self._s_units / nb, 1.0
        else:
            t_ri = n_avg if n_avg is not None else s_avg / nb  # type: ignore[operator]
            t_r = s_avg if s_avg is not None else n_avg * nb  # type: ignore[operator]
            pair = float(np.mean(mp.pair_seconds[-8:])) if mp.pair_seconds else 0.0
        return CostContext(
            block_bounds=bounds,
            c_r=self.c_r,
            t_ri=t_ri,
            t_r=t_r,
            driver_block_size=block_size,
            theta=self.topk.theta,
            descending=self.rank.descending,
            join_factor=self.cfg.join_factor,
            pair_time=pair,
        )

    def aps_step(self, drv_env, block_size: int, block_index: int) -> TraceEntry:
        if self.plan_mode in ("nplan", "splan"):
            return TraceEntry(block_index, self.plan_mode, theta=self.topk.theta)
        if self.plan_mode == "alternate":
            return TraceEntry(block_index, ("nplan", "splan")[block_index % 2], theta=self.topk.theta)
        ctx = self._cost_context(drv_env, block_size)
        choice, n, s = cheaper_plan(ctx)
        return TraceEntry(block_index, choice, ctx.x, ctx.nb, n.time, s.time, ctx.theta)

    # -- main loop ------------------------------------------------------------

    def run(self) -> list[ResultRow]:
        start = time.perf_counter()
        ed = self.driver.entity_var
        self.stats.driver_blocks_total = len(self.drv.blocks)
        for i, (block, bound) in enumerate(zip(self.drv.blocks, self.drv.bounds)):
            if self.topk.cannot_beat(bound):
                self.stats.early_terminated = True
                break
            self.mp.driver_block = i
            self.stats.driver_blocks += 1
            drv_rows = self._block_table(self.driver_plan, block)
            if not len(drv_rows):
                continue
            a_ids = np.unique(drv_rows.cols[ed])
            v_star = None
            if self.join_algo == "squad":
                cands = candidate_nodes(self.tree, _boxes_of(self.store, a_ids), self.cs, self.d)  # type: ignore[arg-type]
                v_star = select_optimal(cands, self.cfg.cost_model, root=self.tree.root)  # type: ignore[union-attr]
                if not v_star.v_star:
                    self.stats.trace.append(TraceEntry(i, "pruned", theta=self.topk.theta))
                    continue
            drv_env = self._interval_env(drv_rows, self.driver)
            entry = self.aps_step(drv_env, len(drv_rows), i)
            self.stats.trace.append(entry)
            if entry.plan == "nplan":
                self._run_n_plan(drv_rows, a_ids, v_star, drv_env)
            else:
                self._run_s_plan(drv_rows, a_ids, v_star)
        self.stats.seconds = time.perf_counter() - start
        return self.results()

    def results(self) -> list[ResultRow]:
        out = []
        rows, scores = self.topk.rows, self.topk.scores
        lookup = self.store.dictionary.lookup
        for i in range(len(rows)):
            ids = {v: int(rows.cols[v][i]) for v in self.var_order}
            out.append(ResultRow({v: lookup(t) for v, t in ids.items()}, float(scores[i]), ids))
        return out


def execute_topk(
    query: Query,
    store: QuadStore,
    tree: SQuadTree | None,
    config: EngineConfig | None = None,
    plan: str = "aps",
    join_algo: str = "squad",
    k: int | None = None,
    stats: ExecStats | None = None,
) -> list[ResultRow]:
    """Top-k rows of ``query``; pass ``stats`` to collect counters and the plan trace."""
    run = TopKExecution(query, store, tree, config, plan, join_algo, k)
    if stats is not None:
        run.stats = stats
    return run.run()


# -- output -----------------------------------------------------------------------


def format_tsv(rows: Sequence[ResultRow], query: Query) -> str:
    cols = list(query.projection)
    if cols == ["*"]:
        cols = sorted(rows[0].bindings) if rows else []
    alias = query.alias[0] if query.alias else None
    lines = []
    for row in rows:
        cells = []
        for v in cols:
            if v == alias:
                cells.append(f"{row.score:.6f}")
            else:
                term = row.bindings.get(v)
                cells.append(term.lexical if term is not None else "")
        cells.append(f"{row.score:.6f}")
        lines.append("\t".join(cells))
    return "\n".join(lines) + ("\n" if lines else "")

from __future__ import annotations

import numpy as np
import pytest

import oracle
from streak import EngineConfig, build, execute_topk, format_tsv, load_reified, parse_query
from streak.executor import ExecStats, TopKExecution, refine, sip_filter, spatial_join_block
from streak.queries import query_text
from streak.squadtree import TreeConfig

MODES = ("aps", "nplan", "splan")


def _keys(rows):
    return [oracle.row_key(r.bindings, r.score) for r in rows]


def test_fig2_verbatim_has_no_rows(fig2_store):
    q = parse_query(query_text("running_example"))
    tree = build(fig2_store)
    for plan in MODES:
        assert execute_topk(q, fig2_store, tree, plan=plan) == []


@pytest.mark.parametrize("plan", MODES)
@pytest.mark.parametrize("algo", ["squad", "rtree"])
def test_fig2_with_numeric_concentration(fig2_numeric, plan, algo):
    store, tree = fig2_numeric
    q = parse_query(query_text("running_example"))
    rows = execute_topk(q, store, tree, plan=plan, join_algo=algo)
    assert len(rows) == 1
    row = rows[0]
    assert row.bindings["wineRegion"].lexical == ":Mosel"
    assert row.bindings["river"].lexical == ":Moselle"
    assert row.score == pytest.approx(4.5e9 * 0.7)
    tsv = format_tsv(rows, q)
    assert tsv.splitlines()[0].split("\t")[:2] == [":Mosel", ":Moselle"]
    assert tsv.rstrip().endswith("3150000000.000000")


def _oracle_top(q, store, k):
    return [oracle.row_key(r, s) for s, _, r in oracle.top_k(oracle.full_join(q, store), q, k)]


@pytest.mark.parametrize("name", ["lgd_q1", "lgd_q5", "yago_q1", "yago_q4"])
def test_alternating_plans_lose_nothing(bench1k, name):
    store, tree = bench1k
    q = parse_query(query_text(name))
    cfg = EngineConfig(block_size=32)
    want = _oracle_top(q, store, 50)
    run = TopKExecution(q, store, tree, cfg, "alternate", "squad", 50)
    assert _keys(run.run()) == want
    assert set(run.stats.plan_counts()) <= {"nplan", "splan", "pruned"}


def test_predicate_missing_from_data_gives_no_rows(fig2_store):
    q = parse_query(query_text("yago_q1"))
    tree = build(fig2_store)
    for plan in MODES:
        assert execute_topk(q, fig2_store, tree, plan=plan) == []


def test_k_beyond_result_size(bench1k):
    store, tree = bench1k
    q = parse_query(query_text("yago_q1"))
    full = oracle.full_join(q, store)
    rows = execute_topk(q, store, tree, k=len(full) + 50)
    assert _keys(rows) == _oracle_top(q, store, len(full) + 50)
    scores = [r.score for r in rows]
    assert scores == sorted(scores, reverse=q.rank.descending)


def test_forced_plan_skips_adaptive_choice(bench1k):
    store, tree = bench1k
    q = parse_query(query_text("lgd_q2"))
    stats = ExecStats()
    execute_topk(q, store, tree, EngineConfig(block_size=64), plan="nplan", k=10, stats=stats)
    assert set(t.plan for t in stats.trace) <= {"nplan", "pruned"}
    assert all(t.cost_n == 0 and t.cost_s == 0 for t in stats.trace)


def test_early_termination_is_sound(bench1k):
    store, tree = bench1k
    q = parse_query(query_text("lgd_q6"))
    run = TopKExecution(q, store, tree, EngineConfig(block_size=16), "aps", "squad", 1)
    run.run()
    st = run.stats
    assert st.early_terminated and st.driver_blocks < st.driver_blocks_total
    # every unread driver block is bounded strictly below the k-th score
    assert all(run.rank.worse(b, run.topk.theta) for b in run.drv.bounds[st.driver_blocks :])
    assert _keys(run.results()) == _oracle_top(q, store, 1)


def test_bad_arguments(bench1k):
    store, tree = bench1k
    q = parse_query(query_text("lgd_q1"))
    with pytest.raises(ValueError):
        TopKExecution(q, store, tree, plan="fast")
    with pytest.raises(ValueError):
        TopKExecution(q, store, None, join_algo="squad")


# -- SIP, join and refinement ------------------------------------------------------


@pytest.fixture(scope="module")
def grid():
    rng = np.random.default_rng(4)
    pts = rng.uniform(0, 1000, (4000, 2)).round(3)
    text = "".join(f':e{i} :hasGeometry "POINT({x} {y})".\n' for i, (x, y) in enumerate(pts.tolist()))
    store = load_reified(text)
    return store, build(store, TreeConfig(leaf_capacity=32))


def _geometry_cursor(store):
    return store.scan((None, None, store.term_id(":hasGeometry"), None), "PSO")


def test_sip_root_passes_everything(grid):
    store, tree = grid
    res = sip_filter(_geometry_cursor(store), [tree.root])
    assert res.passed == res.total == 4000


def test_sip_level1_node_is_a_quarter(grid):
    store, tree = grid
    node = tree.find([2])
    res = sip_filter(_geometry_cursor(store), [node])
    assert 0.2 < res.passed / res.total < 0.3
    # exactly the rows whose object overlaps the cell
    cell = node.cell
    boxes = store.spatial_mbrs
    want = (boxes[:, 2] >= cell.minx) & (boxes[:, 0] < cell.maxx) & (boxes[:, 3] >= cell.miny) & (boxes[:, 1] < cell.maxy)
    assert set(res.rows[:, 1].tolist()) == set(store.spatial_ids[want].tolist())


def test_sip_partition_over_children(grid):
    store, tree = grid
    total = 0
    seen = set()
    for child in tree.root.child_nodes():
        rows = sip_filter(_geometry_cursor(store), [child]).rows
        total += len(rows)
        seen |= set(rows[:, 1].tolist())
    # points belong to exactly one quadrant
    assert total == 4000 and len(seen) == 4000


def _points(coords):
    text = "".join(f':p{i} :hasGeometry "POINT({x} {y})".\n' for i, (x, y) in enumerate(coords))
    text += ':far :hasGeometry "POINT(0 0)".\n:far2 :hasGeometry "POINT(1 1)".\n'
    return load_reified(text)


def test_join_block_keeps_close_points():
    st = _points([(0.25, 0.25), (0.75, 0.25)])
    tree = build(st, TreeConfig(leaf_capacity=1))
    a, b = st.term_id(":p0"), st.term_id(":p1")
    ids = np.array(sorted([a, b]), dtype=np.uint64)
    boxes = st.spatial_mbrs[np.searchsorted(st.spatial_ids, ids)]
    out = spatial_join_block(ids[:1], boxes[:1], ids[1:], boxes[1:], [tree.root], 1.0)
    assert len(out) == 1
    far = np.array([st.term_id(":far"), st.term_id(":far2")], dtype=np.uint64)
    fb = st.spatial_mbrs[np.searchsorted(st.spatial_ids, far)]
    assert len(spatial_join_block(far[:1], fb[:1], far[1:], fb[1:], [tree.root], 0.01)) == 0


def test_join_block_superset_of_exact(grid):
    store, tree = grid
    rng = np.random.default_rng(8)
    ids = store.spatial_ids
    boxes = store.spatial_mbrs
    a = np.sort(rng.choice(len(ids), 200, replace=False))
    b = np.arange(len(ids))
    d = 25.0
    got = spatial_join_block(ids[a], boxes[a], ids[b], boxes[b], [tree.root], d)
    ax, ay = boxes[a, 0], boxes[a, 1]
    dist = np.hypot(ax[:, None] - boxes[None, :, 0], ay[:, None] - boxes[None, :, 1])
    ii, jj = np.nonzero(dist <= d)
    want = set(zip(ids[a][ii].tolist(), ids[jj].tolist()))
    assert want == set(map(tuple, got.tolist()))


def test_refine_boundary_and_shapes():
    text = (
        ':a :hasGeometry "POINT(0 0)".\n:b :hasGeometry "POINT(3 4)".\n'
        ':l1 :hasGeometry "LINESTRING(0 10, 10 10, 10 0)".\n:l2 :hasGeometry "POINT(2 2)".\n'
    )
    st = load_reified(text)
    a, b, l1, l2 = (st.term_id(n) for n in (":a", ":b", ":l1", ":l2"))
    pair = np.array([[a, b]], dtype=np.uint64)
    assert len(refine(pair, 5.0, st)) == 0
    assert len(refine(pair, 5.0 + 1e-9, st)) == 1
    # the L-shape's MBR covers the point but its segments are 8 away
    assert len(refine(np.array([[l1, l2]], dtype=np.uint64), 5.0, st)) == 0
    assert len(refine(np.zeros((0, 2), dtype=np.uint64), 5.0, st)) == 0
    memo = {}
    refine(pair, 6.0, st, memo)
    assert memo == {(a, b): True}

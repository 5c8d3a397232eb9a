"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line that the session summary prints in
criterion order; tolerances are fixed constants below.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

import oracle
from antichain import brute_force
from streak import (
    DatasetSpec,
    EngineConfig,
    benchmark_spec,
    build,
    execute_topk,
    generate_dataset,
    load_reified,
    parse_query,
)
from streak.bloom import CsSignature
from streak.datagen import CsTemplate, Distribution
from streak.executor import ExecStats, TopKExecution, refine
from streak.geometry import MBR, Geometry, exact_distance, mbr_min_distance, mbr_of, quadrant_path
from streak.node_select import NodeCostModel, select_optimal, solve
from streak.queries import BENCHMARK, LGD, YAGO, all_queries
from streak.spatial_id import MAX_LOCAL, decode_id, encode_id, in_subtree, node_id_range
from streak.squadtree import Candidates, SQuadTreeNode, tree_to_bytes

MODES = ("aps", "nplan", "splan")
K_VALUES = (1, 10, 50, 100)

CANDIDATE_RATIO_MAX = 0.1
SIP_SKIP_MIN = 0.8
APS_SLOWDOWN_MAX = 1.25
APS_CORRECT_MIN = 0.9
INDEX_FRACTION_MAX = 0.05
FLOAT_TOL = 1e-9

# "# TP" column of the benchmark characteristics table
TABLE_TP = {
    **dict(zip(LGD, (6, 6, 7, 9, 9, 6, 6, 7))),
    **dict(zip(YAGO, (6, 8, 7, 8, 8, 7, 6, 7))),
}


# -- 1 ------------------------------------------------------------------------------


def test_exactness_against_oracle(report):
    started = time.perf_counter()
    cells = mismatches = 0
    bad = []
    for n in (1_000, 10_000):
        store = load_reified(generate_dataset(benchmark_spec(n, seed=1)))
        tree = build(store)
        for name, text in all_queries().items():
            q = parse_query(text)
            full = oracle.full_join(q, store)
            for k in K_VALUES:
                want = [oracle.row_key(r, s) for s, _, r in oracle.top_k(full, q, k)]
                for plan in MODES:
                    rows = execute_topk(q, store, tree, plan=plan, k=k)
                    cells += 1
                    if [oracle.row_key(r.bindings, r.score) for r in rows] != want:
                        mismatches += 1
                        bad.append(f"{n}/{name}/k={k}/{plan}")
    secs = time.perf_counter() - started
    ok = mismatches == 0
    report(1, "exactness vs oracle", ok, f"{cells - mismatches}/{cells} cells identical, {secs:.0f}s")
    assert ok, bad[:10]


# -- 2 ------------------------------------------------------------------------------


def _random_tree(rng, size):
    """A quadtree-shaped tree of ``size`` nodes with random CS counts and E-lists."""
    nodes = []
    root = _node((), rng)
    nodes.append(root)
    while len(nodes) < size:
        parent = nodes[int(rng.integers(len(nodes)))]
        free = [q for q in range(4) if parent.children[q] is None]
        if not free or parent.level >= 10:
            continue
        q = int(rng.choice(free))
        child = _node(parent.path + (q,), rng)
        parent.children[q] = child
        nodes.append(child)
    return root, nodes


def _node(path, rng):
    sig = CsSignature.from_counts({0: int(rng.integers(0, 500)), 1: int(rng.integers(0, 50))})
    empty = CsSignature.empty()
    e_list = np.arange(int(rng.integers(0, 200)), dtype=np.uint64)
    return SQuadTreeNode(path, MBR(0, 0, 1, 1), MBR(0, 0, 1, 1), e_list, 0, 0, sig, empty, empty)


def test_node_selection_optimality(report):
    rng = np.random.default_rng(2024)
    started = time.perf_counter()
    worst = 0.0
    for _ in range(500):
        root, nodes = _random_tree(rng, int(rng.integers(1, 31)))
        m = NodeCostModel(*rng.uniform(0.01, 2.0, 3))
        cs_ids = frozenset({0, 1}) if rng.random() < 0.5 else frozenset({0})
        res = select_optimal(Candidates(nodes, [], {"self": cs_ids}), m, root)

        def cost(a):
            return m.alpha_io * sum(a.self_cs.exact_count.get(c, 0) for c in cs_ids) + m.alpha_cpu * len(a.e_list)

        want, _ = brute_force(root, lambda a: a.child_nodes(), cost, lambda a: m.alpha_merge * len(a.e_list))
        worst = max(worst, abs(res.sigma_star - want))

    # the four mixed-level selections of the worked example tree
    kids = {"b": ["d", "e"], "d": ["k"], "e": ["o", "p", "q"]}
    base = dict.fromkeys("bdekopq", 10.0)
    cases = {
        ("b",): {"b": 1.0},
        ("d", "e"): {"b": 100.0, "d": 1.0, "e": 1.0},
        ("d", "o", "p", "q"): {"b": 100.0, "d": 1.0, "e": 100.0, "o": 1.0, "p": 1.0, "q": 1.0},
        ("e", "k"): {"b": 100.0, "d": 100.0, "k": 1.0, "e": 1.0},
    }
    realised = []
    for expected, overrides in cases.items():
        costs = {**base, **overrides}
        sel = solve("b", lambda a: True, lambda a: kids.get(a, []), costs.__getitem__, lambda a: 0.5)
        realised.append(tuple(sorted(sel.v_star)) == expected)
    secs = time.perf_counter() - started
    ok = worst <= FLOAT_TOL and all(realised)
    report(2, "node-selection optimality", ok, f"500 trees, max |sigma - brute force| = {worst:.2e}; "
           f"{sum(realised)}/4 worked selections realised; {secs:.1f}s")
    assert ok


# -- 3 ------------------------------------------------------------------------------

SKEW_QUERY = """PREFIX ex: <http://streak.example/>
SELECT ?a ?b WHERE {
  ?a ex:kindA ?x . ?a ex:s1 ?s1 . ?a ex:hasGeometry ?ga .
  ?b ex:kindC ?y . ?b ex:s2 ?s2 . ?b ex:hasGeometry ?gb .
  FILTER(distance(?ga, ?gb) < 150)
} ORDER BY DESC(?s1 + ?s2) LIMIT 1000000"""


def test_candidate_count_reduction(report):
    # driven CS (kindC) covers 2% of the spatial objects
    spec = DatasetSpec(
        n_spatial=10_000,
        templates=(
            CsTemplate(("kindA", "s1"), 0.015, ("s1",)),
            CsTemplate(("kindB",), 0.965),
            CsTemplate(("kindC", "s2"), 0.02, ("s2",)),
        ),
        seed=1,
    )
    store = load_reified(generate_dataset(spec))
    tree = build(store)
    q = parse_query(SKEW_QUERY)
    counts, results = {}, {}
    for algo in ("squad", "rtree"):
        stats = ExecStats()
        rows = execute_topk(q, store, tree, plan="splan", join_algo=algo, stats=stats)
        counts[algo] = stats.candidates
        results[algo] = [(r.ids, r.score) for r in rows]
    ratio = counts["squad"] / max(counts["rtree"], 1)
    ok = ratio <= CANDIDATE_RATIO_MAX and results["squad"] == results["rtree"] and counts["rtree"] > 0
    report(3, "candidate-count reduction", ok,
           f"squad {counts['squad']} vs R-tree {counts['rtree']} candidates, ratio {ratio:.3f} (max {CANDIDATE_RATIO_MAX})")
    assert ok


# -- 4 ------------------------------------------------------------------------------


def test_sip_effectiveness(report):
    rng = np.random.default_rng(9)
    lines = []
    for i, (x, y) in enumerate(rng.uniform(0, 1000, (10_000, 2)).round(3).tolist()):
        lines.append(f':n{i} :hasGeometry "POINT({x} {y})".\n:n{i} :kindB :v{i % 7}.')
    # the driver objects sit inside the south-west cell of the south-west quadrant
    for i, (x, y) in enumerate(rng.uniform(20, 230, (200, 2)).round(3).tolist()):
        lines.append(f':d{i} :hasGeometry "POINT({x} {y})".\n:d{i} :kindA :w.\n'
                     f':d{i} :score "{rng.random():.6f}"^^<http://www.w3.org/2001/XMLSchema#double>.')
    store = load_reified("\n".join(lines) + "\n")
    tree = build(store)
    boxes = store.spatial_mbrs[np.isin(store.spatial_ids, [store.term_id(f":d{i}") for i in range(200)])]
    assert all(quadrant_path(MBR(*b), store.space, 2) == (0, 0) for b in boxes)
    q = parse_query(
        "SELECT ?a ?b WHERE { ?a :kindA ?w . ?a :score ?s . ?a :hasGeometry ?ga . ?b :kindB ?v . "
        "?b :hasGeometry ?gb . FILTER(distance(?ga, ?gb) < 20) } ORDER BY DESC(?s) LIMIT 100000"
    )
    stats = ExecStats()
    rows = execute_topk(q, store, tree, plan="splan", stats=stats)
    full = oracle.full_join(q, store)
    skip = stats.sip_skipped / stats.sip_total
    ok = skip >= SIP_SKIP_MIN and len(rows) == len(full)
    report(4, "SIP effectiveness", ok,
           f"skipped {stats.sip_skipped}/{stats.sip_total} driven-scan tuples = {skip:.1%} (min {SIP_SKIP_MIN:.0%})")
    assert ok


# -- 5 ------------------------------------------------------------------------------

APS_SELECTIVE = """PREFIX ex: <http://streak.example/>
SELECT ?a ?b WHERE { ?a ex:kindA ?x . ?a ex:s1 ?s1 . ?a ex:hasGeometry ?ga .
  ?b ex:kindB ?y . ?b ex:s2 ?s2 . ?b ex:hasGeometry ?gb .
  FILTER(distance(?ga, ?gb) < 30) } ORDER BY DESC(0.000001 * ?s1 + ?s2) LIMIT 10"""

APS_EXHAUSTIVE = APS_SELECTIVE.replace("0.000001 * ?s1 + ?s2) LIMIT 10", "?s1 + ?s2) LIMIT 100000")


def _best_time(q, store, tree, cfg, plan):
    best, stats = math.inf, None
    for _ in range(3):
        run = TopKExecution(q, store, tree, cfg, plan, "squad")
        t0 = time.perf_counter()
        run.run()
        elapsed = time.perf_counter() - t0
        if elapsed < best:
            best, stats = elapsed, run.stats
    return best, stats


def test_aps_dominance(report):
    spec = DatasetSpec(
        n_spatial=8000,
        templates=(CsTemplate(("kindA", "s1"), 0.3, ("s1",)), CsTemplate(("kindB", "s2"), 0.7, ("s2",))),
        scores=Distribution(),
        seed=3,
        side=2000,
    )
    store = load_reified(generate_dataset(spec))
    tree = build(store)
    cfg = EngineConfig(block_size=128)
    details, ok = [], True
    for label, text, winner in (("selective", APS_SELECTIVE, "nplan"), ("exhaustive", APS_EXHAUSTIVE, "splan")):
        q = parse_query(text)
        times = {plan: _best_time(q, store, tree, cfg, plan) for plan in MODES}
        aps_time, aps_stats = times["aps"]
        fixed = min(times["nplan"][0], times["splan"][0])
        chosen = [t.plan for t in aps_stats.trace if t.plan in ("nplan", "splan")]
        correct = sum(p == winner for p in chosen) / max(len(chosen), 1)
        slow = aps_time / fixed
        fastest = min(("nplan", "splan"), key=lambda p: times[p][0])
        ok &= slow <= APS_SLOWDOWN_MAX and correct >= APS_CORRECT_MIN and fastest == winner
        details.append(f"{label}: aps/best {slow:.2f}, {winner} on {correct:.0%} of {len(chosen)} blocks")
    report(5, "APS dominance", ok, "; ".join(details))
    assert ok


# -- 6 ------------------------------------------------------------------------------


def _reference_encode(path, local):
    bits = "1" + "".join(f"{d:02b}" for d in path).ljust(20, "0") + f"{local:039b}" + f"{len(path):04b}"
    return int(bits, 2)


def test_encoding_and_ranges(report):
    rng = np.random.default_rng(6)
    started = time.perf_counter()
    failures = 0
    for level in range(11):
        locals_ = rng.integers(0, MAX_LOCAL, 100_000, dtype=np.int64).tolist()
        paths = rng.integers(0, 4, (100_000, level)).tolist()
        for path, local in zip(paths, locals_):
            raw = encode_id(path, local)
            if decode_id(raw) != (tuple(path), local):
                failures += 1
        for path, local in zip(paths[:2000], locals_[:2000]):
            failures += encode_id(path, local) != _reference_encode(path, local)

    # prefix clustering and I-Range containment over random objects
    space = MBR(0, 0, 1000, 1000)
    lo = rng.uniform(0, 999, (100_000, 2))
    hi = np.minimum(lo + rng.exponential(1.0, (100_000, 2)), 1000)
    ids = []
    for i, (a, b) in enumerate(zip(lo.tolist(), hi.tolist())):
        path = quadrant_path(MBR(a[0], a[1], b[0], b[1]), space, 10)
        raw = encode_id(path, i)
        ids.append(raw)
        for depth in range(len(path) + 1):
            prefix = path[:depth]
            failures += not in_subtree(raw, prefix) or raw not in node_id_range(prefix)
    arr = np.sort(np.array(ids, dtype=np.uint64))
    levels = (arr & np.uint64(15)).astype(np.int64)
    for level in range(1, 11):
        deep = arr[levels >= level]
        key = deep >> np.uint64(63 - 2 * level)
        failures += int(np.sum(np.diff(key.astype(np.int64)) < 0))
    secs = time.perf_counter() - started
    ok = failures == 0
    report(6, "encoding and ranges", ok, f"1.1M roundtrips and 100k objects, {failures} violations, {secs:.0f}s")
    assert ok


# -- 7 ------------------------------------------------------------------------------


def _geometry(rng):
    kind = int(rng.integers(3))
    c = rng.uniform(0, 100, 2)
    if kind == 0:
        return Geometry.point(*c)
    pts = [tuple(c + rng.uniform(-3, 3, 2)) for _ in range(int(rng.integers(2, 5)))]
    if kind == 1:
        return Geometry.linestring(pts)
    ang = np.sort(rng.uniform(0, 2 * np.pi, int(rng.integers(3, 6))))
    ring = [(c[0] + 3 * math.cos(a), c[1] + 3 * math.sin(a)) for a in ang]
    return Geometry.polygon(ring + [ring[0]])


def test_geometry_soundness(report):
    rng = np.random.default_rng(7)
    started = time.perf_counter()
    pool = [_geometry(rng) for _ in range(2000)]
    boxes = [mbr_of(g) for g in pool]
    violations = 0
    pairs = rng.integers(0, len(pool), (100_000, 2)).tolist()
    for i, j in pairs:
        if exact_distance(pool[i], pool[j]) < mbr_min_distance(boxes[i], boxes[j]) - FLOAT_TOL:
            violations += 1

    # pairs at distance exactly d are dropped; a hair further out they are kept
    text = (
        ':a :hasGeometry "POINT(0 0)".\n:b :hasGeometry "POINT(3 4)".\n'
        ':c :hasGeometry "POINT(0 1)".\n:l :hasGeometry "LINESTRING(-1 0, 1 0)".\n'
        ':p :hasGeometry "POLYGON((10 0, 12 0, 12 2, 10 2, 10 0))".\n:r :hasGeometry "POINT(13 1)".\n'
    )
    st = load_reified(text)
    t = st.term_id
    boundary = [((":a", ":b"), 5.0), ((":c", ":l"), 1.0), ((":p", ":r"), 1.0)]
    strict = True
    for (x, y), d in boundary:
        pair = np.array([[t(x), t(y)]], dtype=np.uint64)
        strict &= len(refine(pair, d, st)) == 0 and len(refine(pair, d + 1e-6, st)) == 1
    secs = time.perf_counter() - started
    ok = violations == 0 and strict
    report(7, "geometry soundness", ok,
           f"{violations} lower-bound violations in 100k pairs; boundary strict: {strict}; {secs:.0f}s")
    assert ok


# -- 8 ------------------------------------------------------------------------------


def test_index_compactness(report):
    text = generate_dataset(DatasetSpec(n_spatial=100_000, seed=1))
    store = load_reified(text)
    tree = build(store)
    raw = len(text.encode("utf-8"))
    size = len(tree_to_bytes(tree))
    frac = size / raw
    ok = frac <= INDEX_FRACTION_MAX
    report(8, "index compactness", ok, f"tree {size} bytes / input {raw} bytes = {frac:.2%} (max {INDEX_FRACTION_MAX:.0%})")
    assert ok


# -- 9 ------------------------------------------------------------------------------


@pytest.mark.xfail(
    strict=True,
    reason="the characteristics table gives 7 patterns for LGD Q3 and 8 for YAGO Q2; their listed texts have 8 and 7",
)
def test_parser_conformance(report):
    counts = {name: len(parse_query(text).patterns) for name, text in all_queries().items()}
    wrong = [f"{n} parsed {counts[n]} vs table {TABLE_TP[n]}" for n in BENCHMARK if counts[n] != TABLE_TP[n]]
    ok = not wrong
    detail = f"{len(counts)}/16 parse; {16 - len(wrong)}/16 pattern counts match"
    report(9, "parser conformance", ok, detail + ("; " + ", ".join(wrong) if wrong else ""))
    assert ok, wrong

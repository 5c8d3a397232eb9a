"""
Choosing filtering nodes and skipping scan tuples
=================================================

Uniform points of two kinds. A handful of "driver" points sit in one corner;
we look for quadtree nodes that may hold a "driven" object near them, pick
the cheapest covering set of nodes, and use it to filter a full scan.
"""

import numpy as np

from streak import build, load_reified
from streak.executor import sip_filter
from streak.node_select import NodeCostModel, select_optimal
from streak.squadtree import CsQuery, TreeConfig, candidate_nodes

rng = np.random.default_rng(0)
lines = []
for i, (x, y) in enumerate(rng.uniform(0, 1000, (5000, 2)).round(2).tolist()):
    kind = ":shop" if i % 5 else ":school"
    lines.append(f':o{i} :hasGeometry "POINT({x} {y})".\n:o{i} :kind {kind}.\n:o{i} {kind}Name :n{i}.')
store = load_reified("\n".join(lines) + "\n")
tree = build(store, TreeConfig(leaf_capacity=32))
print(f"{len(store.spatial_ids)} objects, {sum(1 for _ in tree.nodes())} tree nodes")

# Driver objects: everything inside a 100 x 100 corner box.
boxes = store.spatial_mbrs
corner = boxes[(boxes[:, 2] < 100) & (boxes[:, 3] < 100)]
print(f"{len(corner)} driver objects in the corner")

# Driven side: objects carrying the school-name predicate.
pred = store.term_id(":schoolName")
want = CsQuery(frozenset({store.term_id(":kind"), pred, store.term_id(":hasGeometry")}))
cands = candidate_nodes(tree, corner, want, d=15.0)
print(f"phase 1 kept {len(cands.nodes)} nodes, frontier {len(cands.frontier)}")

sel = select_optimal(cands, NodeCostModel(), tree.root)
print("chosen nodes:", [n.label() for n in sel.v_star], f"cost {sel.sigma_star:.1f}")

# Filter the geometry scan (subject-sorted) with the chosen nodes.
cursor = store.scan((None, None, store.term_id(":hasGeometry"), None), "PSO")
res = sip_filter(cursor, sel)
print(f"kept {res.passed} of {res.total} tuples, skipped {res.skipped / res.total:.1%}")

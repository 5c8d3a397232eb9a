"""
Switching driven plans block by block
=====================================

Two workloads over the same data. With a very selective ranking only a few
driven blocks are worth reading, so the block-wise plan wins. When every row
is wanted, one full scan is cheaper than many block reads. The adaptive mode
re-decides for every driver block.
"""

import time

from streak import DatasetSpec, EngineConfig, build, generate_dataset, load_reified, parse_query
from streak.datagen import CsTemplate, Distribution
from streak.executor import TopKExecution

spec = DatasetSpec(
    n_spatial=6000,
    templates=(CsTemplate(("kindA", "s1"), 0.3, ("s1",)), CsTemplate(("kindB", "s2"), 0.7, ("s2",))),
    scores=Distribution(),
    seed=3,
    side=2000,
)
store = load_reified(generate_dataset(spec))
tree = build(store)
cfg = EngineConfig(block_size=128)

base = """PREFIX ex: <http://streak.example/>
SELECT ?a ?b WHERE {{ ?a ex:kindA ?x . ?a ex:s1 ?s1 . ?a ex:hasGeometry ?ga .
  ?b ex:kindB ?y . ?b ex:s2 ?s2 . ?b ex:hasGeometry ?gb .
  FILTER(distance(?ga, ?gb) < 30) }} ORDER BY DESC({rank}) LIMIT {k}"""

workloads = {
    "selective": base.format(rank="0.000001 * ?s1 + ?s2", k=10),
    "exhaustive": base.format(rank="?s1 + ?s2", k=100000),
}

for name, text in workloads.items():
    q = parse_query(text)
    print(f"\n{name}")
    for plan in ("aps", "nplan", "splan"):
        run = TopKExecution(q, store, tree, cfg, plan)
        t0 = time.perf_counter()
        rows = run.run()
        trace = "".join({"nplan": "N", "splan": "S"}.get(t.plan, "-") for t in run.stats.trace)
        print(f"  {plan:6s} {time.perf_counter() - t0:6.3f}s rows={len(rows):6d} trace={trace}")

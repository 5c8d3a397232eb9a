"""
A small benchmark sweep
=======================

Generate a mixed dataset with the benchmark preset, run a few of the shipped
query templates under every plan mode and k, and print the CSV report. The
runner refuses to report if two modes disagree on any result.
"""

from streak import benchmark_spec, build, generate_dataset, load_reified
from streak.bench import run_benchmark
from streak.queries import query_text

store = load_reified(generate_dataset(benchmark_spec(2000, seed=7)))
tree = build(store)
print(f"{len(store)} quads, {len(store.spatial_ids)} spatial entities")

queries = {name: query_text(name) for name in ("lgd_q1", "lgd_q6", "yago_q1", "yago_q5")}
report = run_benchmark(store, tree, queries, ["aps", "nplan", "splan", "splan:rtree"], [1, 10, 100], runs=3, kept=2)
print(report.to_csv())

for mode in ("aps", "nplan", "splan", "splan:rtree"):
    print(f"{mode:12s} geometric mean {report.geometric_mean(mode) * 1000:.2f} ms")

"""
A spatial top-k join on a ten-quad graph
========================================

A wine region and a polluted river, each described by a handful of reified
quads. We ask for the best (region, river) pair whose geometries are less
than 10 units apart, ranked by production times pesticide concentration.
"""

from streak import build, execute_topk, format_tsv, load_reified, parse_query
from streak.executor import TopKExecution
from streak.queries import query_text

# Each "#@ <id>" marker names the statement on the next line, so the river's
# pollution fact can itself carry facts (what it includes, how concentrated).
DATA = """@prefix xsd: <http://www.w3.org/2001/XMLSchema#>.
#@ <id1>
:Mosel :grapeVariety :Albalonga.
#@ <id2>
:Mosel :soilType :porus_slate.
#@ <id3>
:Mosel :hasProduction "4500000000"^^xsd:double.
#@ <id4>
:Mosel :hasGeometry "POINT(28.6,77.2)".
#@ <id4>
:Moselle :pollutedBy :pesticide.
#@ <id5>
<id4> :includes :pest.
#@ <id6>
:pest :concentration "0.7"^^xsd:double.
#@ <id7>
:Moselle :hasMouth :Rhine.
#@ <id8>
:Moselle :source :Vosges_mountains.
#@ <id8>
:Moselle :hasGeometry "LINESTRING((28.3,77.5),(28.4,77.6))".
"""

store = load_reified(DATA)
tree = build(store)
print(f"{len(store)} quads, {len(store.spatial_ids)} spatial entities")
print(tree.dump())

# The query ships with the package; f1 and f2 are identity functions.
text = query_text("running_example")
print(text)
q = parse_query(text)

# One row: Mosel and Moselle are about 0.33 units apart.
rows = execute_topk(q, store, tree)
print(format_tsv(rows, q))

# The same run with its plans and per-block decisions exposed.
run = TopKExecution(q, store, tree)
run.run()
print(run.driver_plan.explain())
print(run.n_plan.explain())
print(run.s_plan.explain())
for entry in run.stats.trace:
    print(entry)

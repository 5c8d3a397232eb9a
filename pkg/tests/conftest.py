from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from streak import benchmark_spec, build, generate_dataset, load_reified  # noqa: E402

FIG2 = """@prefix xsd: <http://www.w3.org/2001/XMLSchema#>.
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
<id4> :includes ?pest.
#@ <id6>
?pest :concentration ?c.
#@ <id7>
:Moselle :hasMouth :Rhine.
#@ <id8>
:Moselle :source :Vosges_mountains.
#@ <id8>
:Moselle :hasGeometry "LINESTRING((28.3,77.5),(28.4,77.6))".
"""

# the same graph with a numeric concentration so the running example has a row
FIG2_NUMERIC = FIG2.replace("?pest :concentration ?c.", '?pest :concentration "0.7"^^xsd:double.')


@pytest.fixture(scope="session")
def fig2_store():
    return load_reified(FIG2)


@pytest.fixture(scope="session")
def fig2_numeric():
    store = load_reified(FIG2_NUMERIC)
    return store, build(store)


@pytest.fixture(scope="session")
def bench1k():
    store = load_reified(generate_dataset(benchmark_spec(1000, seed=1)))
    return store, build(store)


# -- acceptance reporting ------------------------------------------------------------

ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def report():
    """Record one acceptance line; the summary prints them in criterion order."""

    def _report(number: int, title: str, ok: bool, detail: str) -> None:
        ACCEPTANCE[number] = (title, ok, detail)

    return _report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number}. {title}: {detail}")

"""Benchmark query templates shipped with the engine."""

from __future__ import annotations

from importlib import resources

LGD = [f"lgd_q{i}" for i in range(1, 9)]
YAGO = [f"yago_q{i}" for i in range(1, 9)]
BENCHMARK = LGD + YAGO


def query_text(name: str) -> str:
    return resources.files(__name__).joinpath(f"{name}.sparql").read_text()


def all_queries() -> dict[str, str]:
    return {name: query_text(name) for name in BENCHMARK}

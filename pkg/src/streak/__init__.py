"""Top-k spatial distance joins over reified RDF with an S-QuadTree index."""

from __future__ import annotations

from .config import EngineConfig, load_config, parse_config
from .datagen import DatasetSpec, benchmark_spec, generate_dataset, parse_spec
from .executor import ExecStats, ResultRow, execute_topk, format_tsv
from .geometry import MBR, Geometry, exact_distance, mbr_min_distance, parse_wkt
from .query import Query, parse_query
from .squadtree import SQuadTree, build
from .store import QuadStore, load_reified

__all__ = [
    "MBR",
    "DatasetSpec",
    "EngineConfig",
    "ExecStats",
    "Geometry",
    "QuadStore",
    "Query",
    "ResultRow",
    "SQuadTree",
    "benchmark_spec",
    "build",
    "exact_distance",
    "execute_topk",
    "format_tsv",
    "generate_dataset",
    "load_config",
    "load_reified",
    "mbr_min_distance",
    "parse_config",
    "parse_query",
    "parse_spec",
    "parse_wkt",
]

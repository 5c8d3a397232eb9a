"""Benchmark runner: repeated timed runs per (query, mode, k) with a cross-mode exactness gate."""

from __future__ import annotations

import csv
import hashlib
import io
import statistics
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .config import EngineConfig
from .errors import ModeMismatch
from .executor import ExecStats, ResultRow, execute_topk
from .query import parse_query
from .squadtree import SQuadTree
from .store import QuadStore

RUNS = 5
KEPT = 3


@dataclass
class BenchRow:
    query: str
    mode: str
    k: int
    seconds: float
    rows: int
    candidates: int
    driver_blocks: int
    driven_blocks: int
    sip_skipped: int
    trace: str
    checksum: str


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)

    def to_csv(self) -> str:
        out = io.StringIO()
        names = list(BenchRow.__dataclass_fields__)
        w = csv.writer(out, lineterminator="\n")
        w.writerow(names)
        for r in self.rows:
            w.writerow([f"{getattr(r, n):.6f}" if n == "seconds" else getattr(r, n) for n in names])
        return out.getvalue()

    def geometric_mean(self, mode: str, k: int | None = None) -> float:
        times = [r.seconds for r in self.rows if r.mode == mode and (k is None or r.k == k)]
        return statistics.geometric_mean(max(t, 1e-9) for t in times) if times else float("nan")


def result_checksum(rows: Sequence[ResultRow]) -> str:
    """Order-sensitive digest of the rows' bindings and scores."""
    h = hashlib.sha256()
    for row in rows:
        for v in sorted(row.bindings):
            h.update(f"{v}={row.bindings[v].lexical}\t".encode())
        h.update(f"{row.score:.6f}\n".encode())
    return h.hexdigest()[:16]


def _split_mode(mode: str) -> tuple[str, str]:
    plan, _, algo = mode.partition(":")
    return plan, algo or "squad"


def _trace_text(stats: ExecStats) -> str:
    return "".join({"nplan": "N", "splan": "S"}.get(t.plan, "-") for t in stats.trace)


def run_benchmark(
    store: QuadStore,
    tree: SQuadTree | None,
    queries: Mapping[str, str],
    modes: Sequence[str] = ("aps", "nplan", "splan"),
    k_values: Sequence[int] = (1, 10, 50, 100),
    config: EngineConfig | None = None,
    runs: int = RUNS,
    kept: int = KEPT,
) -> BenchReport:
    """Time every cell ``runs`` times and keep the median of the final ``kept`` runs.

    A mode may carry a join algorithm suffix, e.g. ``splan:rtree``. Raises
    :class:`ModeMismatch` when two modes disagree on a (query, k) result.
    """
    report = BenchReport()
    for name, text in queries.items():
        q = parse_query(text)
        for k in k_values:
            sums: dict[str, str] = {}
            for mode in modes:
                plan, algo = _split_mode(mode)
                times, stats, rows = [], ExecStats(), []
                for _ in range(runs):
                    stats = ExecStats()
                    t0 = time.perf_counter()
                    rows = execute_topk(q, store, tree, config, plan, algo, k, stats)
                    times.append(time.perf_counter() - t0)
                digest = result_checksum(rows)
                sums[mode] = digest
                report.rows.append(
                    BenchRow(
                        name,
                        mode,
                        k,
                        statistics.median(times[-kept:]),
                        len(rows),
                        stats.candidates,
                        stats.driver_blocks,
                        stats.driven_blocks_fetched,
                        stats.sip_skipped,
                        _trace_text(stats),
                        digest,
                    )
                )
            if len(set(sums.values())) > 1:
                raise ModeMismatch(f"{name} k={k}: result checksums differ across modes {sums}")
    return report

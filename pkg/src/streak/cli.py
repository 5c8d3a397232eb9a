"""Command-line entry point: ``streak load | query | gen | bench``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import snapshot
from .bench import run_benchmark
from .config import load_config
from .datagen import generate_dataset, parse_spec
from .errors import StreakError
from .executor import JOIN_ALGOS, ExecStats, TopKExecution, format_tsv
from .query import parse_query
from .squadtree import build
from .store import load_reified


def _load(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    with open(args.input, encoding="utf-8") as fh:
        store = load_reified(fh, cfg.max_levels)
    tree = build(store, cfg.tree)
    size = snapshot.save(args.out, store, tree)
    print(
        f"loaded {len(store)} quads, {len(store.spatial_ids)} spatial entities; snapshot {size} bytes",
        file=sys.stderr,
    )
    return 0


def _query(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    store, tree = snapshot.load(args.snapshot)
    q = parse_query(Path(args.query).read_text(encoding="utf-8"))
    run = TopKExecution(q, store, tree, cfg, args.plan, args.join_algo, args.k)
    rows = run.run()
    sys.stdout.write(format_tsv(rows, q))
    if args.explain:
        err = sys.stderr
        print(run.driver_plan.explain(), file=err)
        print(run.n_plan.explain(), file=err)
        print(run.s_plan.explain(), file=err)
        for t in run.stats.trace:
            theta = "-" if t.theta is None else f"{t.theta:.6g}"
            print(
                f"block {t.block}: plan={t.plan} x={t.x}/{t.nb} cost_n={t.cost_n:.6g} "
                f"cost_s={t.cost_s:.6g} theta={theta}",
                file=err,
            )
        _print_stats(run.stats)
    return 0


def _print_stats(s: ExecStats) -> None:
    print(
        f"driver blocks {s.driver_blocks}/{s.driver_blocks_total}, driven blocks fetched {s.driven_blocks_fetched}, "
        f"candidates {s.candidates}, verified {s.verified}, sip skipped {s.sip_skipped}/{s.sip_total}, "
        f"early stop {s.early_terminated}, {s.seconds:.4f}s",
        file=sys.stderr,
    )


def _gen(args: argparse.Namespace) -> int:
    spec = parse_spec(Path(args.spec).read_text(encoding="utf-8"))
    Path(args.out).write_text(generate_dataset(spec), encoding="utf-8")
    return 0


def _bench(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    store, tree = snapshot.load(args.db)
    qdir = Path(args.queries)
    files = sorted(qdir.glob("*.sparql")) if qdir.is_dir() else [qdir]
    queries = {f.stem: f.read_text(encoding="utf-8") for f in files}
    modes = [m for m in args.modes.split(",") if m]
    ks = [int(k) for k in args.k.split(",") if k]
    report = run_benchmark(store, tree, queries, modes, ks, cfg, runs=args.runs)
    Path(args.out).write_text(report.to_csv(), encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="streak", description="Top-k spatial distance joins over reified RDF.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("load", help="index an input file and write a snapshot")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=_load)

    p = sub.add_parser("query", help="run one query against a snapshot; TSV on stdout")
    p.add_argument("snapshot")
    p.add_argument("--query", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--plan", choices=["aps", "nplan", "splan"], default="aps")
    p.add_argument("--join-algo", choices=list(JOIN_ALGOS), default="squad")
    p.add_argument("--explain", action="store_true")
    p.add_argument("--config")
    p.set_defaults(func=_query)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_gen)

    p = sub.add_parser("bench", help="run the benchmark protocol and write CSV")
    p.add_argument("--db", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--modes", default="aps,nplan,splan")
    p.add_argument("--k", default="1,10,50,100")
    p.add_argument("--out", required=True)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--config")
    p.set_defaults(func=_bench)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (StreakError, OSError, ValueError) as exc:
        print(f"streak: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

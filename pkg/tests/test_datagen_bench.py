from __future__ import annotations

import numpy as np
import pytest

import streak.bench as bench
from streak import DatasetSpec, benchmark_spec, build, generate_dataset, load_reified, parse_spec
from streak.bench import run_benchmark
from streak.datagen import HEADER, CsTemplate, Distribution
from streak.errors import ModeMismatch
from streak.queries import query_text


def test_empty_dataset_is_header_only():
    assert generate_dataset(DatasetSpec(n_spatial=0)) == HEADER


def test_quad_count_arithmetic():
    spec = DatasetSpec(n_spatial=100, templates=(CsTemplate(("a", "b", "c"), 1.0, ("c",)),))
    assert len(load_reified(generate_dataset(spec))) == 100 * (3 + 1)


def test_deterministic():
    a = generate_dataset(benchmark_spec(300, seed=4))
    assert a == generate_dataset(benchmark_spec(300, seed=4))
    assert a != generate_dataset(benchmark_spec(300, seed=5))


def test_truncated_exponential_mean():
    dist = Distribution("exponential", 1.0)
    x = np.linspace(0.0, 1.0, 200001)
    pdf = np.exp(-x)
    # numeric integration, independent of the closed form used by the generator
    integrate = getattr(np, "trapezoid", None) or np.trapz
    want = integrate(x * pdf, x) / integrate(pdf, x)
    draws = dist.sample(np.random.default_rng(0), 10_000)
    assert draws.min() >= 0 and draws.max() <= 1
    assert abs(draws.mean() - want) <= 0.1 * want
    assert dist.mean() == pytest.approx(want, rel=1e-6)


def test_parse_spec_roundtrip():
    spec = parse_spec(
        "nSpatial = 50\nseed = 9\nmix = 0.5,0.3,0.2\nscores = exponential(2)\n"
        "clustering = clusters(3, 0.1)\ntemplate = 0.25 | hasKind hasRate | hasRate\n"
        "template = 0.75 | hasKind | | reified\n"
    )
    assert spec.n_spatial == 50 and spec.clusters == 3 and spec.scores.lam == 2
    assert spec.templates[1].reified and spec.templates[0].numeric == ("hasRate",)
    store = load_reified(generate_dataset(spec))
    assert len(store.spatial_ids) == 50
    with pytest.raises(ValueError):
        parse_spec("colour = red")


@pytest.fixture(scope="module")
def small():
    store = load_reified(generate_dataset(benchmark_spec(300, seed=2)))
    return store, build(store)


def test_one_cell_report(small):
    store, tree = small
    rep = run_benchmark(store, tree, {"q": query_text("lgd_q1")}, ["aps"], [1], runs=2, kept=1)
    assert len(rep.rows) == 1
    lines = rep.to_csv().splitlines()
    assert lines[0].startswith("query,mode,k,seconds") and len(lines) == 2


def test_modes_agree_over_k_sweep(small):
    store, tree = small
    rep = run_benchmark(
        store, tree, {"q": query_text("yago_q1")}, ["aps", "nplan", "splan", "splan:rtree"], [1, 10, 50, 100], runs=1, kept=1
    )
    assert len(rep.rows) == 16
    for k in (1, 10, 50, 100):
        assert len({r.checksum for r in rep.rows if r.k == k}) == 1
    assert rep.geometric_mean("aps") > 0


def test_mode_mismatch_detected(small, monkeypatch):
    store, tree = small
    real = bench.execute_topk

    def broken(q, st, tr, cfg, plan, algo, k, stats):
        rows = real(q, st, tr, cfg, plan, algo, k, stats)
        return rows[:-1] if plan == "splan" else rows

    monkeypatch.setattr(bench, "execute_topk", broken)
    with pytest.raises(ModeMismatch):
        run_benchmark(store, tree, {"q": query_text("yago_q1")}, ["aps", "splan"], [10], runs=1, kept=1)

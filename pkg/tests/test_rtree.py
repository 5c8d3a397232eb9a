from __future__ import annotations

import numpy as np

from streak.rtree import str_bulk_load, sync_traversal_join


def _boxes(rng, n, side=100.0, size=2.0):
    lo = rng.uniform(0, side, (n, 2))
    hi = lo + rng.uniform(0, size, (n, 2))
    return np.hstack([lo, hi])


def test_single_object():
    t = str_bulk_load(np.array([7], dtype=np.uint64), np.array([[0, 0, 1, 1.0]]))
    assert t.height == 1 and t.root.is_leaf


def test_height_and_cover():
    rng = np.random.default_rng(0)
    boxes = _boxes(rng, 100)
    t = str_bulk_load(np.arange(100, dtype=np.uint64), boxes, fanout=10)
    assert t.height == 2
    leaves = t.leaves()
    assert sorted(np.concatenate([l.items for l in leaves]).tolist()) == list(range(100))
    for leaf in leaves:
        m = boxes[leaf.items]
        assert np.all(m[:, :2] >= leaf.mbr[:2]) and np.all(m[:, 2:] <= leaf.mbr[2:])


def test_search_matches_scan():
    rng = np.random.default_rng(1)
    boxes = _boxes(rng, 500)
    t = str_bulk_load(np.arange(500, dtype=np.uint64), boxes)
    q = np.array([20, 20, 40, 35.0])
    want = np.flatnonzero((boxes[:, 0] <= q[2]) & (boxes[:, 2] >= q[0]) & (boxes[:, 1] <= q[3]) & (boxes[:, 3] >= q[1]))
    assert sorted(t.search(q).tolist()) == want.tolist()


def _nested_loop(a, b, d):
    dx = np.maximum(0, np.maximum(a[:, None, 0] - b[None, :, 2], b[None, :, 0] - a[:, None, 2]))
    dy = np.maximum(0, np.maximum(a[:, None, 1] - b[None, :, 3], b[None, :, 1] - a[:, None, 3]))
    i, j = np.nonzero(np.hypot(dx, dy) <= d)
    return set(zip(i.tolist(), j.tolist()))


def test_join_equals_nested_loop():
    rng = np.random.default_rng(2)
    a, b = _boxes(rng, 300), _boxes(rng, 400)
    ta = str_bulk_load(np.arange(300, dtype=np.uint64), a, 8)
    tb = str_bulk_load(np.arange(400, dtype=np.uint64), b, 8)
    for d in (0.0, 1.5, 6.0):
        got = sync_traversal_join(ta, tb, d)
        assert set(map(tuple, got.pairs.tolist())) == _nested_loop(a, b, d)
        assert got.candidate_count == len(_nested_loop(a, b, d))


def test_far_clusters_and_singletons():
    rng = np.random.default_rng(3)
    a = _boxes(rng, 50, side=10)
    b = _boxes(rng, 50, side=10) + 1000
    ta = str_bulk_load(np.arange(50, dtype=np.uint64), a)
    tb = str_bulk_load(np.arange(50, dtype=np.uint64), b)
    assert sync_traversal_join(ta, tb, 5).candidate_count == 0
    one = str_bulk_load(np.array([1], dtype=np.uint64), np.array([[3, 3, 3, 3.0]]))
    assert sync_traversal_join(one, one, 0.0).candidate_count == 1

from __future__ import annotations

import numpy as np
import pytest

from conftest import FIG2_NUMERIC
from streak import snapshot
from streak.cli import main
from streak.errors import SnapshotError
from streak.queries import query_text
from streak.squadtree import tree_to_bytes


def test_roundtrip(bench1k, tmp_path):
    store, tree = bench1k
    path = tmp_path / "db.strk"
    size = snapshot.save(path, store, tree)
    assert size == path.stat().st_size
    back, back_tree = snapshot.load(path)
    assert np.array_equal(back.quads, store.quads)
    assert np.array_equal(back.spatial_ids, store.spatial_ids)
    assert tree_to_bytes(back_tree) == tree_to_bytes(tree)
    for tid in store.spatial_ids[:20].tolist():
        assert back.lookup(tid) == store.lookup(tid)
        assert back.geometry_of[tid] == store.geometry_of[tid]


def test_corrupt_snapshot(bench1k):
    store, tree = bench1k
    data = snapshot.dumps(store, tree)
    with pytest.raises(SnapshotError):
        snapshot.loads(b"XXXXX" + data[5:])
    with pytest.raises(SnapshotError):
        snapshot.loads(data[:40])


def test_cli_end_to_end(tmp_path, capsys):
    data = tmp_path / "fig2.ttl"
    data.write_text(FIG2_NUMERIC)
    qfile = tmp_path / "q.sparql"
    qfile.write_text(query_text("running_example"))
    db = tmp_path / "fig2.strk"
    assert main(["load", str(data), "--out", str(db)]) == 0
    capsys.readouterr()
    assert main(["query", str(db), "--query", str(qfile), "--explain"]) == 0
    out, err = capsys.readouterr()
    assert out.startswith(":Mosel\t:Moselle")
    assert "block 0: plan=" in err and "driver:" in err


def test_cli_gen_and_bench(tmp_path):
    spec = tmp_path / "spec.txt"
    spec.write_text("preset = benchmark\nnSpatial = 200\nseed = 3\n")
    data = tmp_path / "gen.ttl"
    assert main(["gen", "--spec", str(spec), "--out", str(data)]) == 0
    db = tmp_path / "gen.strk"
    assert main(["load", str(data), "--out", str(db)]) == 0
    qdir = tmp_path / "queries"
    qdir.mkdir()
    (qdir / "yago_q1.sparql").write_text(query_text("yago_q1"))
    csv = tmp_path / "out.csv"
    assert main(["bench", "--db", str(db), "--queries", str(qdir), "--modes", "aps,splan", "--k", "1,10",
                 "--runs", "1", "--out", str(csv)]) == 0
    assert len(csv.read_text().splitlines()) == 1 + 4


def test_cli_errors(tmp_path, capsys):
    assert main(["query", str(tmp_path / "missing.strk"), "--query", "x"]) == 1
    bad = tmp_path / "bad.ttl"
    bad.write_text("#@ <r1>\n")
    assert main(["load", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "streak:" in capsys.readouterr().err

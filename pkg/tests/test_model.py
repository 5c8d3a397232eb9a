from __future__ import annotations

import pytest

from streak.errors import SpatialIdCollision, UnknownId
from streak.model import Dictionary, Term, TermKind, is_spatial_id
from streak.spatial_id import encode_id


def test_dense_ids_from_zero_and_idempotent():
    d = Dictionary()
    assert d.intern(Term.iri(":Albalonga")) == 0
    assert d.intern(Term.iri(":Albalonga")) == 0
    assert d.intern(Term.iri(":porus_slate")) == 1
    assert d.lookup(0).lexical == ":Albalonga"


def test_spatial_intern_keeps_minted_id():
    d = Dictionary()
    d.intern(Term.iri(":Albalonga"))
    sid = encode_id([0, 3], 0)
    assert d.intern(Term.iri(":Mosel"), True, sid) == sid
    assert is_spatial_id(sid)
    assert d.lookup(sid).lexical == ":Mosel"
    # the dense counter is untouched by spatial ids
    assert d.intern(Term.iri(":x")) == 1


def test_unknown_id_and_collision():
    d = Dictionary()
    with pytest.raises(UnknownId):
        d.lookup(999999)
    sid = encode_id([1], 0)
    d.intern(Term.iri(":a"), True, sid)
    with pytest.raises(SpatialIdCollision):
        d.intern(Term.iri(":b"), True, sid)
    with pytest.raises(ValueError):
        d.intern(Term.iri(":c"), True, 5)


def test_term_identity_ignores_payload():
    a = Term.number(1.5)
    b = Term(a.lexical, TermKind.NUMERIC)
    assert a == b and hash(a) == hash(b)
    assert Term("x", TermKind.IRI) != Term("x", TermKind.STRING)

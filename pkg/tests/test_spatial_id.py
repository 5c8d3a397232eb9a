from __future__ import annotations

import pytest

from streak.errors import LocalIdOverflow, NotSpatial
from streak.spatial_id import (
    MAX_LOCAL,
    decode_id,
    encode_id,
    in_subtree,
    level_of,
    node_id_range,
)


def test_field_layout():
    assert encode_id([], 0) == 0x8000000000000000
    # digit 2 = 0b10 at bits 62..61, local 1 at bit 4, level 1
    assert encode_id([2], 1) == 0xC000000000000011
    # digits 0,3 = 0b0011 at bits 62..59, level 2
    assert encode_id([0, 3], 0) == 0x9800000000000002


def test_decode_roundtrip():
    assert decode_id(0x8000000000000000) == ((), 0)
    assert decode_id(0xC000000000000011) == ((2,), 1)
    with pytest.raises(NotSpatial):
        decode_id(5)


def test_ranges():
    assert node_id_range([]) == (0x8000000000000000, 0xFFFFFFFFFFFFFFFF)
    assert node_id_range([2]) == (0xC000000000000000, 0xDFFFFFFFFFFFFFFF)


def test_subtree_membership():
    assert in_subtree(encode_id([2, 1], 7), [2])
    assert not in_subtree(encode_id([0], 7), [1])
    # a root object with local 0 falls inside [0]'s interval but not its subtree
    root_obj = encode_id([], 0)
    assert root_obj in node_id_range([0])
    assert not in_subtree(root_obj, [0])


def test_limits():
    with pytest.raises(LocalIdOverflow):
        encode_id([1], MAX_LOCAL)
    with pytest.raises(ValueError):
        encode_id([4], 0)
    with pytest.raises(ValueError):
        encode_id([0] * 11, 0)
    assert level_of(encode_id([3] * 10, MAX_LOCAL - 1)) == 10

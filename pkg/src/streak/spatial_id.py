"""The (S, Z, I, L) identifier codec.

Layout of the 64-bit word, most significant first::

    S (1 bit, 63) | Z (20 bits, 62..43) | I (39 bits, 42..4) | L (4 bits, 3..0)

Z holds the quadrant digits left-aligned, two bits per level, so every id
minted under a path shares that path's bit prefix and a node's ids form one
contiguous interval.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

from .errors import LocalIdOverflow, NotSpatial

MAX_LEVELS = 10
Z_BITS = 2 * MAX_LEVELS
I_BITS = 39
L_BITS = 4

S_SHIFT = 63
Z_SHIFT = I_BITS + L_BITS  # 43
I_SHIFT = L_BITS

S_MASK = 1 << S_SHIFT
Z_MASK = ((1 << Z_BITS) - 1) << Z_SHIFT
I_MASK = ((1 << I_BITS) - 1) << I_SHIFT
L_MASK = (1 << L_BITS) - 1
MAX_LOCAL = 1 << I_BITS
ALL_ONES = (1 << 64) - 1


class IdRange(NamedTuple):
    lo: int
    hi: int

    def __contains__(self, raw: object) -> bool:  # type: ignore[override]
        return isinstance(raw, int) and self.lo <= raw <= self.hi


def z_bits(path: Sequence[int]) -> int:
    z = 0
    for i, d in enumerate(path):
        if not 0 <= d <= 3:
            raise ValueError(f"quadrant digit {d} out of range")
        z |= d << (Z_BITS - 2 * (i + 1))
    return z


def encode_id(path: Sequence[int], local: int) -> int:
    level = len(path)
    if level > MAX_LEVELS:
        raise ValueError(f"path deeper than {MAX_LEVELS} levels")
    if not 0 <= local:
        raise ValueError("local id must be non-negative")
    if local >= MAX_LOCAL:
        raise LocalIdOverflow(f"local id {local} needs more than {I_BITS} bits")
    return S_MASK | (z_bits(path) << Z_SHIFT) | (local << I_SHIFT) | level


def decode_id(raw: int) -> tuple[tuple[int, ...], int]:
    if not raw & S_MASK:
        raise NotSpatial(f"{raw:#x} is not a spatial identifier")
    level = raw & L_MASK
    z = (raw & Z_MASK) >> Z_SHIFT
    path = tuple((z >> (Z_BITS - 2 * (i + 1))) & 3 for i in range(level))
    local = (raw & I_MASK) >> I_SHIFT
    return path, local


def level_of(raw: int) -> int:
    return raw & L_MASK


def node_id_range(path: Sequence[int]) -> IdRange:
    level = len(path)
    if level > MAX_LEVELS:
        raise ValueError(f"path deeper than {MAX_LEVELS} levels")
    lo = S_MASK | (z_bits(path) << Z_SHIFT)
    free_bits = 63 - 2 * level
    hi = lo | ((1 << free_bits) - 1)
    return IdRange(lo, hi)


def in_subtree(raw: int, path: Sequence[int]) -> bool:
    """True iff ``raw`` was minted under ``path`` or one of its extensions.

    The interval test alone also admits ids of ancestor cells whose trailing
    digits happen to be zero; the level field tells those apart.
    """
    lo, hi = node_id_range(path)
    return lo <= raw <= hi and (raw & L_MASK) >= len(path)

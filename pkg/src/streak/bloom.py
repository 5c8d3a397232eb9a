"""Bloom filters over characteristic-set identifiers."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field


@dataclass
class BloomFilter:
    """Plain m-bit Bloom filter with k probes from blake2b double hashing."""

    m: int = 1024
    k: int = 3
    bits: bytearray = field(default=None)  # type: ignore[assignment]
    inserted: int = 0

    def __post_init__(self) -> None:
        if self.m < 8 or self.k < 1:
            raise ValueError("bloom filter needs m >= 8 and k >= 1")
        if self.bits is None:
            self.bits = bytearray((self.m + 7) // 8)

    def _probes(self, key: int) -> list[int]:
        digest = hashlib.blake2b(key.to_bytes(8, "little", signed=False), digest_size=16).digest()
        h1 = int.from_bytes(digest[:8], "little")
        h2 = int.from_bytes(digest[8:], "little") | 1
        return [(h1 + i * h2) % self.m for i in range(self.k)]

    def add(self, key: int) -> None:
        for b in self._probes(key):
            self.bits[b >> 3] |= 1 << (b & 7)
        self.inserted += 1

    def __contains__(self, key: int) -> bool:
        return all(self.bits[b >> 3] & (1 << (b & 7)) for b in self._probes(key))

    def expected_fpr(self, n: int | None = None) -> float:
        n = self.inserted if n is None else n
        return (1.0 - math.exp(-self.k * n / self.m)) ** self.k


@dataclass
class CsSignature:
    """Bloom filter over CS ids plus the exact per-CS cardinalities it summarises."""

    bloom: BloomFilter
    exact_count: dict[int, int] = field(default_factory=dict)

    @classmethod
    def empty(cls, m: int = 1024, k: int = 3) -> CsSignature:
        return cls(BloomFilter(m, k))

    @classmethod
    def from_counts(cls, counts: dict[int, int], m: int = 1024, k: int = 3) -> CsSignature:
        sig = cls.empty(m, k)
        for cs, n in counts.items():
            sig.add(cs, n)
        return sig

    def add(self, cs_id: int, count: int = 1) -> None:
        if cs_id not in self.exact_count:
            self.bloom.add(cs_id)
            self.exact_count[cs_id] = 0
        self.exact_count[cs_id] += count

    def might_contain(self, cs_id: int) -> bool:
        return cs_id in self.bloom

    def cardinality(self, cs_ids) -> int:
        """Objects carrying any of ``cs_ids``; Bloom first, exact map second."""
        total = 0
        for cs in cs_ids:
            if cs in self.bloom:
                total += self.exact_count.get(cs, 0)
        return total

    def matches(self, cs_ids) -> bool:
        return any(cs in self.bloom and cs in self.exact_count for cs in cs_ids)

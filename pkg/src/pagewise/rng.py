"""Pinned pseudo-random primitives for reproducible perturbations.

The generator is splitmix64 (Steele, Lea & Flood's SplittableRandom finalizer)
with the usual constants; draws below a bound use rejection sampling so they
are unbiased, and floats take the top 53 bits. Per-document generators are
seeded with the first 8 bytes (big-endian) of sha256("<seed>:<doc_id>"), which
makes perturbation order-independent and parallel-safe. All of this is part
of the file-format contract: the same (seed, manifest) pair must yield the
same bytes on any platform or implementation.
"""

from __future__ import annotations

import hashlib
from typing import MutableSequence

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """Deterministic 64-bit generator; state advances by the golden gamma."""

    def __init__(self, seed: int) -> None:
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound), unbiased via rejection."""
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound}")
        limit = (_MASK64 + 1) - ((_MASK64 + 1) % bound)
        while True:
            value = self.next_u64()
            if value < limit:
                return value % bound

    def random(self) -> float:
        """Float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def shuffle(self, items: MutableSequence) -> None:
        """In-place Fisher-Yates, from the last position down."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


def document_rng(seed: int, doc_id: str) -> SplitMix64:
    """Per-document generator derived from the run seed and the doc_id."""
    digest = hashlib.sha256(f"{seed}:{doc_id}".encode("utf-8")).digest()
    return SplitMix64(int.from_bytes(digest[:8], "big"))

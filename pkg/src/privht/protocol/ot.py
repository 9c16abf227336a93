"""Oblivious-transfer correlations.

One correlation is a uniform triple (r0, r1, b) together with rb = r_b.
The sender half is (r0, r1) and the receiver half is (b, rb).  Internally a
correlation is packed into an outcome code 0..7 with r0 in bit 0, r1 in bit 1
and b in bit 2; the sender half is encoded as ``r0 + 2*r1`` and the receiver
half as ``b + 2*rb``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

__all__ = [
    "MAX_EXACT_OT",
    "OTCorrelation",
    "enumerate_ot",
    "ot_halves",
    "sample_ot",
]

# 3k random bits must stay within this many for exact enumeration.
MAX_EXACT_OT = 8


@dataclass(frozen=True)
class OTCorrelation:
    r0: int
    r1: int
    b: int
    rb: int

    def __post_init__(self):
        for name in ("r0", "r1", "b", "rb"):
            if getattr(self, name) not in (0, 1):
                raise ValueError(f"{name} must be a bit")
        if self.rb != (self.r1 if self.b else self.r0):
            raise ValueError("rb must equal r_b")

    @classmethod
    def from_code(cls, code: int) -> "OTCorrelation":
        r0, r1, b = code & 1, (code >> 1) & 1, (code >> 2) & 1
        return cls(r0, r1, b, r1 if b else r0)

    @property
    def code(self) -> int:
        return self.r0 | (self.r1 << 1) | (self.b << 2)

    @property
    def sender_half(self) -> tuple[int, int]:
        return (self.r0, self.r1)

    @property
    def receiver_half(self) -> tuple[int, int]:
        return (self.b, self.rb)


def ot_halves(codes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized split of outcome codes into (sender, receiver) encodings."""
    codes = np.asarray(codes)
    r0, r1, b = codes & 1, (codes >> 1) & 1, (codes >> 2) & 1
    rb = np.where(b == 1, r1, r0)
    return r0 + 2 * r1, b + 2 * rb


def sample_ot(k: int, seed: int | np.random.Generator | None) -> list[OTCorrelation]:
    """k independent correlations from a seeded generator."""
    if k < 0:
        raise ValueError("k must be non-negative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return [OTCorrelation.from_code(int(c)) for c in rng.integers(0, 8, size=k)]


def enumerate_ot(k: int) -> Iterator[tuple[Fraction, tuple[OTCorrelation, ...]]]:
    """All 8^k equiprobable assignments of k correlations, with their weight."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if 3 * k > 3 * MAX_EXACT_OT:
        raise OverflowError(f"{k} correlations exceed the exact enumeration budget of {MAX_EXACT_OT}")
    w = Fraction(1, 8 ** k)
    for idx in range(8 ** k):
        yield w, tuple(OTCorrelation.from_code((idx >> (3 * j)) & 7) for j in range(k))

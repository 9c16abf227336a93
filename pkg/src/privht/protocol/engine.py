"""Finite two-party protocols and their vectorized execution.

A protocol is a fixed schedule of one-bit messages.  Each party owns an input
index, private tape symbols and its halves of ``ot_count`` OT correlations.
Message and decision maps are vectorized: they receive numpy arrays for a
whole batch of executions and must return one bit per row.

Randomness seen by a party is a matrix ``rand`` whose columns are its tape
symbols followed by one column per OT correlation (the sender half
``r0 + 2*r1`` for Alice, the receiver half ``b + 2*rb`` for Bob).

Inputs are integer indices; for sample size n over an alphabet of size a the
sequence x^n has index ``sum(x_i * a**(n-1-i))`` (itertools.product order).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Sequence

import numpy as np

from ..dist import HypothesisPair
from .ot import MAX_EXACT_OT, ot_halves

__all__ = [
    "DEFAULT_BUDGET",
    "BudgetExceeded",
    "Chunk",
    "ProtocolError",
    "ProtocolSpec",
    "decode_sequence",
    "encode_sequence",
    "sequence_prior",
]

DEFAULT_BUDGET = 10**8
CHUNK_ROWS = 1 << 18

MessageFn = Callable[[int, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
DecisionFn = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


class ProtocolError(ValueError):
    """A protocol that is malformed or not total on a reachable view."""


class BudgetExceeded(RuntimeError):
    def __init__(self, needed: int, budget: int):
        self.needed, self.budget = needed, budget
        super().__init__(f"exact enumeration needs {needed} states, budget is {budget}")


@dataclass(frozen=True)
class ProtocolSpec:
    name: str
    input_sizes: tuple[int, int]
    schedule: tuple[str, ...]
    message: dict = field(compare=False, repr=False)
    decision: dict = field(compare=False, repr=False)
    tapes: dict = field(default_factory=lambda: {"A": (), "B": ()})
    ot_count: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "schedule", tuple(self.schedule))
        object.__setattr__(self, "tapes", {p: tuple(int(d) for d in self.tapes.get(p, ())) for p in "AB"})
        if any(p not in ("A", "B") for p in self.schedule):
            raise ProtocolError("schedule entries must be 'A' or 'B'")
        if any(d < 1 for p in "AB" for d in self.tapes[p]):
            raise ProtocolError("tape symbol alphabets must be non-empty")
        if self.ot_count < 0:
            raise ProtocolError("ot_count must be non-negative")
        if min(self.input_sizes) < 1:
            raise ProtocolError("input domains must be non-empty")
        for p in "AB":
            if p not in self.decision:
                raise ProtocolError(f"missing decision map for party {p}")
            if p in self.schedule and p not in self.message:
                raise ProtocolError(f"party {p} sends messages but has no message map")

    # -- randomness layout -------------------------------------------------

    @property
    def length(self) -> int:
        return len(self.schedule)

    def rand_width(self, party: str) -> int:
        return len(self.tapes[party]) + self.ot_count

    def rand_radix(self, party: str) -> tuple[int, ...]:
        """Alphabet size of every column of a party's randomness."""
        return self.tapes[party] + (4,) * self.ot_count

    def own_randomness(self, party: str) -> int:
        """Number of distinct values of a party's randomness (not all equally likely jointly)."""
        return math.prod(self.rand_radix(party))

    @property
    def randomness_size(self) -> int:
        return math.prod(self.tapes["A"]) * math.prod(self.tapes["B"]) * 8 ** self.ot_count

    def states(self, pairs: int | None = None) -> int:
        if pairs is None:
            pairs = self.input_sizes[0] * self.input_sizes[1]
        return pairs * self.randomness_size

    def decode_randomness(self, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Split joint randomness indices into the two parties' column matrices."""
        idx = np.asarray(idx, dtype=np.int64)
        cols_a, cols_b = [], []
        for d in self.tapes["A"]:
            cols_a.append(idx % d)
            idx = idx // d
        for d in self.tapes["B"]:
            cols_b.append(idx % d)
            idx = idx // d
        for _ in range(self.ot_count):
            sa, sb = ot_halves(idx % 8)
            cols_a.append(sa)
            cols_b.append(sb)
            idx = idx // 8
        n = len(idx)
        ra = np.column_stack(cols_a).astype(np.int64) if cols_a else np.zeros((n, 0), dtype=np.int64)
        rb = np.column_stack(cols_b).astype(np.int64) if cols_b else np.zeros((n, 0), dtype=np.int64)
        return ra, rb

    def own_index(self, party: str, rand: np.ndarray) -> np.ndarray:
        """Mixed-radix index of a party's randomness columns."""
        out = np.zeros(len(rand), dtype=np.int64)
        stride = 1
        for j, d in enumerate(self.rand_radix(party)):
            out += rand[:, j] * stride
            stride *= d
        return out

    # -- execution ---------------------------------------------------------

    def run(self, x: np.ndarray, y: np.ndarray, ra: np.ndarray, rb: np.ndarray):
        """Execute a batch; returns (transcript bits (B, L), decision A, decision B)."""
        x = np.asarray(x, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        n = len(x)
        tr = np.zeros((n, self.length), dtype=np.int8)
        own = {"A": (x, ra), "B": (y, rb)}
        for s, sender in enumerate(self.schedule):
            inp, rand = own[sender]
            bits = np.asarray(self.message[sender](s, inp, rand, tr[:, :s]))
            tr[:, s] = _as_bits(bits, n, f"message {s} from {sender}")
        da = _as_bits(self.decision["A"](x, ra, tr), n, "decision A")
        db = _as_bits(self.decision["B"](y, rb, tr), n, "decision B")
        return tr, da, db

    def replay_consistent(self, x, y, ra, rb, transcript) -> bool:
        """Every message recomputed from its prefix matches the recorded bit."""
        own = {"A": (np.asarray(x), ra), "B": (np.asarray(y), rb)}
        for s, sender in enumerate(self.schedule):
            inp, rand = own[sender]
            bits = _as_bits(self.message[sender](s, inp, rand, transcript[:, :s]), len(inp), "replay")
            if not np.array_equal(bits, transcript[:, s]):
                return False
        return True

    def chunks(self, pairs: Sequence[tuple[int, int]] | None = None, *,
               budget: int = DEFAULT_BUDGET, chunk_rows: int = CHUNK_ROWS) -> Iterator["Chunk"]:
        """Exact enumeration: every input pair crossed with every randomness assignment."""
        if self.ot_count > MAX_EXACT_OT:
            raise BudgetExceeded(8 ** self.ot_count, 8 ** MAX_EXACT_OT)
        if pairs is None:
            pairs = list(itertools.product(range(self.input_sizes[0]), range(self.input_sizes[1])))
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        r_size = self.randomness_size
        total = len(pairs) * r_size
        if total > budget:
            raise BudgetExceeded(total, budget)
        for start in range(0, total, chunk_rows):
            flat = np.arange(start, min(start + chunk_rows, total), dtype=np.int64)
            pid, ridx = flat // r_size, flat % r_size
            x, y = pairs[pid, 0], pairs[pid, 1]
            ra, rb = self.decode_randomness(ridx)
            tr, da, db = self.run(x, y, ra, rb)
            yield Chunk(x, y, ra, rb, tr, da, db)

    def sample(self, x: int, y: int, count: int, rng: np.random.Generator):
        """Sampled executions for a fixed input pair; not a certificate of anything."""
        ridx = rng.integers(0, self.randomness_size, size=count)
        ra, rb = self.decode_randomness(ridx)
        xs, ys = np.full(count, x), np.full(count, y)
        return self.run(xs, ys, ra, rb)

    def decision_counts(self, budget: int = DEFAULT_BUDGET) -> tuple[np.ndarray, np.ndarray]:
        """Per input pair, how many randomness assignments make each party output 1."""
        mx, my = self.input_sizes
        ca = np.zeros((mx, my), dtype=np.int64)
        cb = np.zeros((mx, my), dtype=np.int64)
        for c in self.chunks(budget=budget):
            np.add.at(ca, (c.x, c.y), c.da)
            np.add.at(cb, (c.x, c.y), c.db)
        return ca, cb

    def decision_probabilities(self, budget: int = DEFAULT_BUDGET) -> tuple[list, list]:
        ca, cb = self.decision_counts(budget)
        r = self.randomness_size
        conv = lambda m: [[Fraction(int(v), r) for v in row] for row in m]
        return conv(ca), conv(cb)


@dataclass
class Chunk:
    x: np.ndarray
    y: np.ndarray
    ra: np.ndarray
    rb: np.ndarray
    transcript: np.ndarray
    da: np.ndarray
    db: np.ndarray

    def transcript_code(self) -> np.ndarray:
        if self.transcript.shape[1] == 0:
            return np.zeros(len(self.x), dtype=np.int64)
        weights = np.left_shift(np.int64(1), np.arange(self.transcript.shape[1], dtype=np.int64))
        return self.transcript.astype(np.int64) @ weights


def _as_bits(bits, n: int, what: str) -> np.ndarray:
    arr = np.asarray(bits)
    if arr.shape == ():
        arr = np.full(n, int(arr))
    if arr.shape != (n,):
        raise ProtocolError(f"{what}: expected {n} values, got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() > 1):
        raise ProtocolError(f"{what}: values must be bits")
    return arr.astype(np.int8)


def encode_sequence(seq: Sequence[int], alphabet: int) -> int:
    out = 0
    for s in seq:
        out = out * alphabet + int(s)
    return out


def decode_sequence(index: int, alphabet: int, n: int) -> tuple[int, ...]:
    out = []
    for _ in range(n):
        out.append(index % alphabet)
        index //= alphabet
    return tuple(reversed(out))


def sequence_prior(h: HypothesisPair, n: int, theta: int) -> tuple[list[list[int]], int]:
    """Integer weights g[x^n][y^n] and denominator G with P(x^n, y^n | theta) = g / G."""
    if not h.exact:
        raise TypeError("exact audits need rational hypotheses")
    p = h[theta]
    nx, ny = p.shape
    den = 1
    for v in p.flat():
        den = den * v.denominator // math.gcd(den, v.denominator)
    cell = [[int(p[x, y] * den) for y in range(ny)] for x in range(nx)]
    xs = list(itertools.product(range(nx), repeat=n))
    ys = list(itertools.product(range(ny), repeat=n))
    g = [[math.prod(cell[a][b] for a, b in zip(xseq, yseq)) for yseq in ys] for xseq in xs]
    return g, den ** n

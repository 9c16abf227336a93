"""Small protocols with known behavior, used as a test fleet and in examples."""

from __future__ import annotations

import math
import random
from fractions import Fraction

import numpy as np

from .secure_eval import as_prob_table, coin_columns
from .engine import ProtocolSpec

__all__ = [
    "bit_width",
    "cleartext_table",
    "coin_flip",
    "no_communication",
    "random_protocol",
    "randomized_response",
    "reveal_equality",
]


def bit_width(size: int) -> int:
    """Bits needed to send an index below ``size``."""
    return max(0, (size - 1).bit_length())


def _index_bit(v: np.ndarray, i: int, width: int) -> np.ndarray:
    """Bit i of ``v``, most significant first."""
    return ((v >> (width - 1 - i)) & 1).astype(np.int8)


def _read_index(tr: np.ndarray, start: int, width: int) -> np.ndarray:
    out = np.zeros(len(tr), dtype=np.int64)
    for i in range(width):
        out = (out << 1) | tr[:, start + i].astype(np.int64)
    return out


def no_communication(sizes: tuple[int, int], out_a: int = 0, out_b: int = 0) -> ProtocolSpec:
    """Nobody speaks; both parties output constants."""
    return ProtocolSpec(
        name="no-communication",
        input_sizes=tuple(sizes),
        schedule=(),
        message={},
        decision={"A": lambda x, r, tr: np.full(len(x), out_a), "B": lambda y, r, tr: np.full(len(y), out_b)},
    )


def coin_flip(sizes: tuple[int, int]) -> ProtocolSpec:
    """Each party outputs a private fair coin and says nothing."""
    return ProtocolSpec(
        name="coin-flip",
        input_sizes=tuple(sizes),
        schedule=(),
        message={},
        decision={"A": lambda x, r, tr: r[:, 0], "B": lambda y, r, tr: r[:, 0]},
        tapes={"A": (2,), "B": (2,)},
    )


def reveal_equality(size: int, name: str = "reveal-equality") -> ProtocolSpec:
    """Alice sends her input in the clear, Bob answers with [x == y]; both output that bit."""
    w = bit_width(size)

    def msg_a(s, x, r, prefix):
        return _index_bit(x, s, w)

    def msg_b(s, y, r, prefix):
        return (_read_index(prefix, 0, w) == y).astype(np.int8)

    return ProtocolSpec(
        name=name,
        input_sizes=(size, size),
        schedule=("A",) * w + ("B",),
        message={"A": msg_a, "B": msg_b},
        decision={"A": lambda x, r, tr: tr[:, w], "B": lambda y, r, tr: tr[:, w]},
    )


def cleartext_table(lam_a, lam_b, name: str = "cleartext") -> ProtocolSpec:
    """Alice sends x; Bob computes both outputs from his own coins and returns Alice's.

    Outputs follow the tables exactly while Bob learns x outright.
    """
    ta, tb = as_prob_table(lam_a), as_prob_table(lam_b)
    if ta.shape != tb.shape:
        raise ValueError(f"tables have different shapes {ta.shape} and {tb.shape}")
    mx, my = ta.shape
    w = bit_width(mx)
    tape_b = (() if ta.deterministic else (ta.denominator,)) + (() if tb.deterministic else (tb.denominator,))
    ia = 0
    ib = 0 if tb.deterministic else len(tape_b) - 1

    def msg_a(s, x, r, prefix):
        return _index_bit(x, s, w)

    def msg_b(s, y, r, prefix):
        x = _read_index(prefix, 0, w)
        return coin_columns(ta, x, y, r[:, ia] if not ta.deterministic else None)

    def dec_b(y, r, tr):
        x = _read_index(tr, 0, w)
        return coin_columns(tb, x, y, r[:, ib] if not tb.deterministic else None)

    return ProtocolSpec(
        name=name,
        input_sizes=(mx, my),
        schedule=("A",) * w + ("B",),
        message={"A": msg_a, "B": msg_b},
        decision={"A": lambda x, r, tr: tr[:, w], "B": dec_b},
        tapes={"A": (), "B": tape_b},
    )


def randomized_response(n: int, flip: Fraction | str = Fraction(1, 4)) -> ProtocolSpec:
    """Binary samples of length n.  Alice sends x^n with each bit flipped
    independently with probability ``flip``; Bob outputs whether the noisy
    copy equals y^n and sends that bit back for Alice to output."""
    flip = Fraction(flip)
    if not 0 <= flip <= 1:
        raise ValueError("flip probability must lie in [0, 1]")
    d, k = flip.denominator, flip.numerator
    coins = 0 < flip < 1

    def msg_a(s, x, r, prefix):
        noise = (r[:, s] < k).astype(np.int8) if coins else np.int8(k)
        return _index_bit(x, s, n) ^ noise

    def msg_b(s, y, r, prefix):
        return (_read_index(prefix, 0, n) == y).astype(np.int8)

    return ProtocolSpec(
        name=f"randomized-response-{flip}",
        input_sizes=(2 ** n, 2 ** n),
        schedule=("A",) * n + ("B",),
        message={"A": msg_a, "B": msg_b},
        decision={"A": lambda x, r, tr: tr[:, n], "B": lambda y, r, tr: tr[:, n]},
        tapes={"A": (d,) * n if coins else (), "B": ()},
        meta={"flip": flip},
    )


def random_protocol(rng: random.Random, sizes: tuple[int, int], rounds: int = 2,
                    tape_a: tuple[int, ...] = (2,), tape_b: tuple[int, ...] = (2,),
                    ot_count: int = 0) -> ProtocolSpec:
    """Uniformly random lookup-table protocol: every message bit and decision
    is an arbitrary function of (own input, own randomness, transcript so far)."""
    sched = tuple(rng.choice("AB") for _ in range(rounds))
    radix = {"A": tuple(tape_a) + (4,) * ot_count, "B": tuple(tape_b) + (4,) * ot_count}
    own = {p: math.prod(radix[p]) for p in "AB"}
    seed = rng.getrandbits(32)
    gen = np.random.default_rng(seed)
    tables = {}
    for s, p in enumerate(sched):
        inp = sizes[0] if p == "A" else sizes[1]
        tables[s] = gen.integers(0, 2, size=(inp, own[p], 2 ** s), dtype=np.int8)
    dec_tables = {p: gen.integers(0, 2, size=(sizes[i], own[p], 2 ** rounds), dtype=np.int8)
                  for i, p in enumerate("AB")}

    def index(p, rand):
        out = np.zeros(len(rand), dtype=np.int64)
        stride = 1
        for j, d in enumerate(radix[p]):
            out += rand[:, j] * stride
            stride *= d
        return out

    def code(prefix):
        if prefix.shape[1] == 0:
            return np.zeros(len(prefix), dtype=np.int64)
        return prefix.astype(np.int64) @ (1 << np.arange(prefix.shape[1], dtype=np.int64))

    def make_msg(p):
        return lambda s, inp, rand, prefix: tables[s][inp, index(p, rand), code(prefix)]

    def make_dec(p):
        return lambda inp, rand, tr: dec_tables[p][inp, index(p, rand), code(tr)]

    return ProtocolSpec(
        name=f"random-{seed:08x}",
        input_sizes=tuple(sizes),
        schedule=sched,
        message={p: make_msg(p) for p in "AB"},
        decision={p: make_dec(p) for p in "AB"},
        tapes={"A": tuple(tape_a), "B": tuple(tape_b)},
        ot_count=ot_count,
        meta={"seed": seed},
    )

"""Turning a binary hypothesis-testing protocol into an AND protocol.

Alice holds u, Bob holds v.  Alice draws Z^n uniformly and sends it in the
clear.  She then tests with X^n = Z^n when u = 1 and a fresh uniform X̂^n
otherwise; Bob uses Y^n = Z^n when v = 1 and a fresh Ŷ^n otherwise.  Both
run the inner protocol on those samples and output its decisions.  Only
u = v = 1 puts the inner protocol under the "X^n = Y^n" hypothesis; every
other input pair gives independent uniform samples.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .audit import enumerate_views
from .engine import DEFAULT_BUDGET, ProtocolError, ProtocolSpec

__all__ = ["AndSecurity", "build_and_reduction", "measure_and_security"]


def _bits_to_index(bits: np.ndarray) -> np.ndarray:
    out = np.zeros(len(bits), dtype=np.int64)
    for i in range(bits.shape[1]):
        out = (out << 1) | bits[:, i].astype(np.int64)
    return out


def build_and_reduction(ht: ProtocolSpec, n: int) -> ProtocolSpec:
    if ht.input_sizes != (2 ** n, 2 ** n):
        raise ProtocolError(f"inner protocol must take binary sequences of length {n}, "
                            f"got input domains {ht.input_sizes}")
    ta, tb = ht.tapes["A"], ht.tapes["B"]
    # Alice's tape: Z^n, then X̂^n, then the inner tape; Bob's: Ŷ^n, then the inner tape
    a_pre, b_pre = 2 * n, n
    a_tapes = (2,) * (2 * n) + ta
    b_tapes = (2,) * n + tb

    def inner_rand(rand: np.ndarray, skip: int) -> np.ndarray:
        return rand[:, skip:]

    def alice_sample(u, rand):
        z = _bits_to_index(rand[:, :n])
        xh = _bits_to_index(rand[:, n:2 * n])
        return np.where(u == 1, z, xh)

    def bob_sample(v, rand, transcript):
        z = _bits_to_index(transcript[:, :n])
        yh = _bits_to_index(rand[:, :n])
        return np.where(v == 1, z, yh)

    def msg_a(s, u, rand, prefix):
        if s < n:
            return rand[:, s].astype(np.int8)
        return ht.message["A"](s - n, alice_sample(u, rand), inner_rand(rand, a_pre), prefix[:, n:])

    def msg_b(s, v, rand, prefix):
        return ht.message["B"](s - n, bob_sample(v, rand, prefix), inner_rand(rand, b_pre), prefix[:, n:])

    def dec_a(u, rand, tr):
        return ht.decision["A"](alice_sample(u, rand), inner_rand(rand, a_pre), tr[:, n:])

    def dec_b(v, rand, tr):
        return ht.decision["B"](bob_sample(v, rand, tr), inner_rand(rand, b_pre), tr[:, n:])

    return ProtocolSpec(
        name=f"and-reduction({ht.name})",
        input_sizes=(2, 2),
        schedule=("A",) * n + ht.schedule,
        message={"A": msg_a, "B": msg_b},
        decision={"A": dec_a, "B": dec_b},
        tapes={"A": a_tapes, "B": b_tapes},
        ot_count=ht.ot_count,
        meta={"inner": ht.name, "n": n},
    )


@dataclass(frozen=True)
class AndSecurity:
    err_max: Fraction
    tv_a: Fraction
    tv_b: Fraction
    errors: dict  # (party, u, v) -> error probability

    def to_dict(self) -> dict:
        return {
            "err_max": str(self.err_max),
            "tv_A": str(self.tv_a),
            "tv_B": str(self.tv_b),
            "errors": {f"{p}:u={u},v={v}": str(e) for (p, u, v), e in sorted(self.errors.items())},
        }


def _view_tv(vt, own: int, others: tuple[int, int], total: int) -> Fraction:
    """TV between a party's view laws for two values of the other input, own input fixed."""
    sel = vt.own == own
    span = int(vt.transcript.max(initial=0)) + 1
    key = vt.rand[sel] * span + vt.transcript[sel]
    other, cnt = vt.other[sel], vt.count[sel]
    laws = []
    for o in others:
        m = other == o
        laws.append(dict(zip(key[m].tolist(), cnt[m].tolist())))
    keys = set(laws[0]) | set(laws[1])
    diff = sum(abs(laws[0].get(k, 0) - laws[1].get(k, 0)) for k in keys)
    return Fraction(diff, 2 * total)


def measure_and_security(and_p: ProtocolSpec, *, budget: int = DEFAULT_BUDGET) -> AndSecurity:
    if and_p.input_sizes != (2, 2):
        raise ProtocolError("AND protocols take one bit per party")
    ca, cb, tables = enumerate_views(and_p, budget)
    r = and_p.randomness_size
    errors = {}
    for party, ones in (("A", ca), ("B", cb)):
        for u in (0, 1):
            for v in (0, 1):
                want = u & v
                wrong = int(ones[u, v]) if want == 0 else r - int(ones[u, v])
                errors[(party, u, v)] = Fraction(wrong, r)
    tv_a = _view_tv(tables["A"], 0, (0, 1), r)
    tv_b = _view_tv(tables["B"], 0, (0, 1), r)
    return AndSecurity(max(errors.values()), tv_a, tv_b, errors)

"""Statistics behind the impossibility side of the trade-off.

Any protocol induces, for each party, a randomized decision function of the
two samples.  From it we compute the decision-weighted posterior shift that
a private protocol must keep below 2*mu, the same quantity averaged over
whole views (checked against an audit), and the fraction of an own-sample
type class on which a party decides a given hypothesis with high
probability.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .achievability import DecisionTable
from .dist import EmpiricalType, HypothesisPair, multinomial
from .protocol.audit import audit
from .protocol.engine import DEFAULT_BUDGET, ProtocolError, ProtocolSpec, decode_sequence, encode_sequence, sequence_prior

__all__ = [
    "MAX_SEQUENCES",
    "AvgPrivacyReport",
    "InducedDecision",
    "SFractionReport",
    "avg_privacy_check",
    "induce_decision",
    "lemma1_privacy_stat",
    "s_fraction",
]

MAX_SEQUENCES = 4096


@dataclass(frozen=True)
class InducedDecision:
    """P(decide 1 | x^n, y^n), rows indexed by Alice's sequence, columns by Bob's."""

    side: str
    n: int
    table: tuple[tuple[Fraction, ...], ...]
    alphabet_sizes: tuple[int, int]
    provenance: str
    type_based: bool = False

    def prob_one(self, x: int, y: int) -> Fraction:
        return self.table[x][y]

    @classmethod
    def from_table(cls, t: DecisionTable) -> "InducedDecision":
        m = tuple(tuple(Fraction(v) for v in row) for row in t.matrix())
        return cls(t.side, t.n, m, t.hypotheses.shape, f"type table ({t.side}, n={t.n})", type_based=True)

    @classmethod
    def constant(cls, side: str, n: int, sizes: tuple[int, int], value) -> "InducedDecision":
        v = Fraction(value)
        m = tuple(tuple(v for _ in range(sizes[1] ** n)) for _ in range(sizes[0] ** n))
        return cls(side, n, m, tuple(sizes), f"constant {v}", type_based=True)


def induce_decision(p: ProtocolSpec, h: HypothesisPair, n: int, *,
                    budget: int = DEFAULT_BUDGET) -> tuple[InducedDecision, InducedDecision]:
    """Exact decision laws of both parties by enumerating all protocol randomness."""
    nx, ny = h.shape
    if p.input_sizes != (nx ** n, ny ** n):
        raise ProtocolError(f"protocol domain {p.input_sizes} does not match n={n} over {nx}x{ny} alphabets")
    pa, pb = p.decision_probabilities(budget)
    conv = lambda m: tuple(tuple(row) for row in m)
    return (InducedDecision("A", n, conv(pa), (nx, ny), p.name),
            InducedDecision("B", n, conv(pb), (nx, ny), p.name))


def _own_index(d: InducedDecision, own) -> int:
    size = d.alphabet_sizes[0] if d.side == "A" else d.alphabet_sizes[1]
    if isinstance(own, int):
        if not 0 <= own < size ** d.n:
            raise ValueError(f"sequence index {own} out of range")
        return own
    own = tuple(own)
    if len(own) != d.n or any(not 0 <= s < size for s in own):
        raise ValueError(f"{own} is not a length-{d.n} sequence over {size} symbols")
    return encode_sequence(own, size)


def lemma1_privacy_stat(d: InducedDecision, h: HypothesisPair, theta: int, own) -> Fraction:
    """sum_i P(i | own) * TV(P(other | own), P(other | i, own)) under hypothesis theta.

    ``own`` is the deciding party's sequence (a tuple or its index).  With
    pi = P(decide 1 | own) and lambda_o = P(decide 1 | own, other) the sum
    collapses to sum_o P(o | own) * |pi - lambda_o|; a decision value of
    probability zero contributes nothing.
    """
    g, _ = sequence_prior(h, d.n, theta)
    i = _own_index(d, own)
    if d.side == "A":
        weights = g[i]
        lam = d.table[i]
    else:
        weights = [row[i] for row in g]
        lam = [row[i] for row in d.table]
    total = sum(weights)
    if total == 0:
        raise ValueError(f"own sequence {own} has probability zero under hypothesis {theta}")
    pi = sum(Fraction(w) * l for w, l in zip(weights, lam)) / total
    return sum((Fraction(w, total) * abs(pi - l) for w, l in zip(weights, lam) if w), Fraction(0))


@dataclass(frozen=True)
class AvgPrivacyReport:
    theta: int
    mu: Fraction
    global_avg: dict        # party -> Fraction
    per_input: dict         # party -> tuple (None where the input has probability zero)
    decision_stat: dict     # party -> tuple of decision-level posterior shifts per own input
    passed: bool

    def to_dict(self) -> dict:
        s = lambda v: None if v is None else str(v)
        return {
            "theta": self.theta,
            "mu": str(self.mu),
            "bound": str(2 * self.mu),
            "global_avg": {k: str(v) for k, v in self.global_avg.items()},
            "per_input": {k: [s(v) for v in vs] for k, vs in self.per_input.items()},
            "decision_stat": {k: [s(v) for v in vs] for k, vs in self.decision_stat.items()},
            "passed": self.passed,
        }


def avg_privacy_check(p: ProtocolSpec, h: HypothesisPair, theta: int, mu, n: int | None = None, *,
                      budget: int = DEFAULT_BUDGET, report=None) -> AvgPrivacyReport:
    """Check that view-averaged and decision-level posterior shifts stay within 2*mu.

    ``report`` may carry an existing audit of the same protocol to avoid
    enumerating twice.
    """
    mu = Fraction(mu)
    nx, ny = h.shape
    if n is None:
        n = round(math.log(p.input_sizes[0], nx)) if nx > 1 else 1
    rep = report if report is not None else audit(p, h, n, budget=budget)
    ind = dict(zip("AB", induce_decision(p, h, n, budget=budget)))
    glob, per, stat = {}, {}, {}
    ok = True
    for party in "AB":
        glob[party] = rep.avg_tv[party][theta]
        per[party] = rep.avg_tv_per_input[party][theta]
        vals = []
        for i, avg in enumerate(per[party]):
            vals.append(None if avg is None else lemma1_privacy_stat(ind[party], h, theta, i))
        stat[party] = tuple(vals)
        ok &= glob[party] <= 2 * mu
        ok &= all(v is None or v <= 2 * mu for v in per[party])
        ok &= all(v is None or v <= 2 * mu for v in stat[party])
    return AvgPrivacyReport(theta, mu, glob, per, stat, bool(ok))


# ---------------------------------------------------------------------------
# S-set fractions


@dataclass(frozen=True)
class SFractionReport:
    q: EmpiricalType
    theta: int
    threshold: Fraction
    fraction: Fraction | None
    averages: tuple           # (own sequence, multiplicity, average P(decide theta)) per evaluated sequence
    note: str = ""

    def in_s(self, avg: Fraction) -> bool:
        return avg >= self.threshold

    def to_dict(self) -> dict:
        return {
            "q": str(self.q),
            "theta": self.theta,
            "threshold": str(self.threshold),
            "fraction": None if self.fraction is None else str(self.fraction),
            "averages": [{"sequence": "".join(map(str, s)), "multiplicity": m, "average": str(a),
                          "in_s": a >= self.threshold} for s, m, a in self.averages],
            "note": self.note,
        }


def _type_class(counts: Sequence[int]):
    """All sequences with the given symbol counts."""
    n = sum(counts)
    for seq in itertools.product(range(len(counts)), repeat=n):
        if all(seq.count(a) == c for a, c in enumerate(counts)):
            yield seq


def _representative(counts: Sequence[int]) -> tuple[int, ...]:
    return tuple(a for a, c in enumerate(counts) for _ in range(c))


def s_fraction(q: EmpiricalType, d: InducedDecision, theta: int, threshold=Fraction(99, 100),
               h: HypothesisPair | None = None) -> SFractionReport:
    """Fraction of the own-marginal type class of ``q`` on which the average
    probability of deciding ``theta``, over partner sequences completing the
    joint type ``q``, reaches ``threshold``.

    The average is uniform over the conditional type class, which is the
    conditional law under any i.i.d. hypothesis.  Passing ``h`` lets the
    report flag type classes of probability zero under ``theta``.
    """
    threshold = Fraction(threshold)
    if q.n != d.n:
        raise ValueError(f"type has n={q.n}, decision is for n={d.n}")
    oq = q if d.side == "A" else q.transpose()
    own_size, other_size = (d.alphabet_sizes if d.side == "A" else d.alphabet_sizes[::-1])
    if oq.shape != (own_size, other_size):
        raise ValueError(f"type shape {q.shape} does not match alphabets {d.alphabet_sizes}")
    if h is not None:
        hp = h[theta] if d.side == "A" else h[theta].transpose()
        px = [sum(hp[a, b] for b in range(other_size)) for a in range(own_size)]
        if any(c and px[a] == 0 for a, c in enumerate(oq.x_counts())):
            return SFractionReport(q, theta, threshold, None, (),
                                   "own-marginal type class has probability zero under this hypothesis")
    if other_size ** d.n > MAX_SEQUENCES or own_size ** d.n > MAX_SEQUENCES:
        raise ValueError(f"sequence enumeration beyond {MAX_SEQUENCES} sequences")
    x_counts = oq.x_counts()
    others = [s for s in itertools.product(range(other_size), repeat=d.n)]

    def average(own_seq):
        oi = encode_sequence(own_seq, own_size)
        total, k = Fraction(0), 0
        for other in others:
            if EmpiricalType.of(own_seq, other, own_size, other_size) != oq:
                continue
            oj = encode_sequence(other, other_size)
            p1 = d.table[oi][oj] if d.side == "A" else d.table[oj][oi]
            total += p1 if theta == 1 else 1 - p1
            k += 1
        return total / k

    class_size = multinomial(x_counts)
    if d.type_based:
        rep = _representative(x_counts)
        avg = average(rep)
        rows = ((rep, class_size, avg),)
        fraction = Fraction(1) if avg >= threshold else Fraction(0)
    else:
        rows = tuple((s, 1, average(s)) for s in _type_class(x_counts))
        fraction = Fraction(sum(1 for _, _, a in rows if a >= threshold), class_size)
    return SFractionReport(q, theta, threshold, fraction, rows)

"""Secure evaluation of a pair of (possibly randomized) decision tables.

Two one-out-of-m transfers built from random OT correlations:

* Bob's output.  Alice holds a row of bits M_0..M_{m-1}, one per possible
  Bob input, where M_y is Bob's output on (x, y).  With m - 1 correlations
  she masks the row as C_i = M_i ^ R_i ^ k_i (no k for the last entry), where
  (k_j, r_j) are the derandomized key pairs of correlation j and R_i is the
  xor of r_0..r_{i-1}.  Bob, choosing y, asks for r_j on every correlation
  except the y-th, where he asks for k_y; that lets him strip exactly C_y.
* Alice's output.  The same transfer with the roles exchanged, running on
  correlations turned around without communication: Bob's keys are
  (rb, rb ^ b), Alice's random choice is r0 ^ r1 and she learns r0.

Choice bits are sent masked by the random choice of the correlation, so a
receiver's message is uniform from the sender's side.  Randomized entries
are realized by a private tape symbol uniform over D values, D the common
denominator of the table, and the coin is ``symbol < p*D``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
import numpy as np

from .audit import enumerate_views
from .engine import DEFAULT_BUDGET, ProtocolSpec

__all__ = [
    "ProbTable",
    "SecureEvalReport",
    "as_prob_table",
    "coin_columns",
    "secure_table_eval",
    "required_ot",
    "verify_theorem6",
]


@dataclass(frozen=True)
class ProbTable:
    """P(output = 1 | x, y) as exact rationals, plus its integer coin encoding."""

    probs: tuple[tuple[Fraction, ...], ...]

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.probs), len(self.probs[0]))

    @property
    def denominator(self) -> int:
        d = 1
        for row in self.probs:
            for v in row:
                d = d * v.denominator // math.gcd(d, v.denominator)
        return d

    @property
    def deterministic(self) -> bool:
        return self.denominator == 1

    def numerators(self) -> np.ndarray:
        d = self.denominator
        return np.array([[int(v * d) for v in row] for row in self.probs], dtype=np.int64)


def as_prob_table(table) -> ProbTable:
    """Accept a ProbTable, a DecisionTable (via ``matrix()``) or a nested sequence."""
    if isinstance(table, ProbTable):
        return table
    if hasattr(table, "matrix"):
        table = table.matrix()
    rows = tuple(tuple(Fraction(v) for v in row) for row in table)
    if not rows or not rows[0] or any(len(r) != len(rows[0]) for r in rows):
        raise ValueError("decision table must be a non-empty rectangular matrix")
    if any(v < 0 or v > 1 for r in rows for v in r):
        raise ValueError("decision probabilities must lie in [0, 1]")
    return ProbTable(rows)


def required_ot(domain: tuple[int, int]) -> int:
    mx, my = domain
    return (mx - 1) + (my - 1)


def coin_columns(t: ProbTable, rows: np.ndarray, cols: np.ndarray, tape: np.ndarray | None) -> np.ndarray:
    """Output bits for table entries (rows[i], cols[i]) using tape symbols when randomized."""
    num = t.numerators()[rows, cols]
    if t.deterministic:
        return num.astype(np.int8)
    return (tape < num).astype(np.int8)


def _xor_prefix(bits: np.ndarray) -> np.ndarray:
    """Column i holds the xor of columns 0..i-1 (column 0 is all zeros)."""
    n, k = bits.shape
    out = np.zeros((n, k + 1), dtype=np.int8)
    if k:
        out[:, 1:] = np.bitwise_xor.accumulate(bits, axis=1)
    return out


def secure_table_eval(lam_a, lam_b, domain: tuple[int, int] | None = None, name: str = "secure-eval") -> ProtocolSpec:
    ta, tb = as_prob_table(lam_a), as_prob_table(lam_b)
    if ta.shape != tb.shape:
        raise ValueError(f"tables have different shapes {ta.shape} and {tb.shape}")
    if domain is not None and tuple(domain) != ta.shape:
        raise ValueError(f"tables have shape {ta.shape}, domain says {tuple(domain)}")
    mx, my = ta.shape
    k1, k2 = my - 1, mx - 1
    # Alice's tape: coins for Bob's outputs (one per y); Bob's: coins for Alice's (one per x)
    tape_a = () if tb.deterministic else (tb.denominator,) * my
    tape_b = () if ta.deterministic else (ta.denominator,) * mx
    na, nb = len(tape_a), len(tape_b)
    e1 = range(0, k1)
    c1 = range(k1, k1 + my)
    e2 = range(k1 + my, k1 + my + k2)
    c2 = range(k1 + my + k2, k1 + my + k2 + mx)
    schedule = ["B"] * k1 + ["A"] * my + ["A"] * k2 + ["B"] * mx

    def sender_keys(parts: np.ndarray, choice_msgs: np.ndarray):
        """Derandomized (k_j, r_j) for Alice as sender on pass-one correlations."""
        s0 = (parts & 1).astype(np.int8)
        s1 = ((parts >> 1) & 1).astype(np.int8)
        k = s0 ^ (choice_msgs & (s0 ^ s1))
        return k, k ^ s0 ^ s1

    def reversed_keys(parts: np.ndarray, choice_msgs: np.ndarray):
        """Bob as sender on turned-around correlations: keys (rb, rb ^ b)."""
        b = (parts & 1).astype(np.int8)
        rb = ((parts >> 1) & 1).astype(np.int8)
        k = rb ^ (choice_msgs & b)
        return k, k ^ b

    def message_a(s, x, rand, prefix):
        ot = rand[:, na:]
        if s in c1:
            i = s - k1
            k, r = sender_keys(ot[:, :k1], prefix[:, e1.start:e1.stop])
            mask = _xor_prefix(r)[:, i]
            if i < my - 1:
                mask = mask ^ k[:, i]
            tape = rand[:, i] if na else None
            return coin_columns(tb, x, np.full(len(x), i), tape) ^ mask
        j = s - e2.start
        parts = ot[:, k1 + j]
        choice = ((parts & 1) ^ ((parts >> 1) & 1)).astype(np.int8)
        return (x != j).astype(np.int8) ^ choice

    def message_b(s, y, rand, prefix):
        ot = rand[:, nb:]
        if s in e1:
            b = ot[:, s] & 1
            return (y != s).astype(np.int8) ^ b.astype(np.int8)
        i = s - c2.start
        k, r = reversed_keys(ot[:, k1:], prefix[:, e2.start:e2.stop])
        mask = _xor_prefix(r)[:, i]
        if i < mx - 1:
            mask = mask ^ k[:, i]
        tape = rand[:, i] if nb else None
        return coin_columns(ta, np.full(len(y), i), y, tape) ^ mask

    def decide_a(x, rand, tr):
        ot = rand[:, na:]
        learned = (ot[:, k1:] & 1).astype(np.int8)  # r0 of each turned-around correlation
        rows = np.arange(len(x))
        out = tr[:, c2.start:c2.stop][rows, x] ^ _xor_prefix(learned)[rows, x]
        last = x == mx - 1
        if k2:
            out = np.where(last, out, out ^ learned[rows, np.minimum(x, k2 - 1)])
        return out

    def decide_b(y, rand, tr):
        ot = rand[:, nb:]
        learned = ((ot[:, :k1] >> 1) & 1).astype(np.int8)  # rb of each pass-one correlation
        rows = np.arange(len(y))
        out = tr[:, c1.start:c1.stop][rows, y] ^ _xor_prefix(learned)[rows, y]
        last = y == my - 1
        if k1:
            out = np.where(last, out, out ^ learned[rows, np.minimum(y, k1 - 1)])
        return out

    return ProtocolSpec(
        name=name,
        input_sizes=(mx, my),
        schedule=tuple(schedule),
        message={"A": message_a, "B": message_b},
        decision={"A": decide_a, "B": decide_b},
        tapes={"A": tape_a, "B": tape_b},
        ot_count=k1 + k2,
        meta={"tables": (ta, tb), "required_ot": k1 + k2},
    )


# ---------------------------------------------------------------------------
# Verification


@dataclass(frozen=True)
class SecureEvalReport:
    passed: bool
    failures: tuple[str, ...]

    def __bool__(self):
        return self.passed

    @property
    def counterexample(self) -> str | None:
        return self.failures[0] if self.failures else None


def _check_independence(vt, limit: int = 5) -> list[str]:
    """Within each (own input, own output), the view law must not depend on the other input."""
    party = vt.party
    view_span = int(vt.transcript.max(initial=0)) + 1
    view = vt.rand * view_span + vt.transcript
    gkey = vt.own * 2 + vt.decision
    order = np.lexsort((view, vt.other, gkey))
    gkey, other, view, cnt = gkey[order], vt.other[order], view[order], vt.count[order]
    failures = []
    bounds = np.flatnonzero(np.diff(gkey)) + 1
    for seg in np.split(np.arange(len(gkey)), bounds):
        g = int(gkey[seg[0]])
        dists = {}
        for o in np.unique(other[seg]):
            sel = seg[other[seg] == o]
            dists[int(o)] = (view[sel], cnt[sel], int(cnt[sel].sum()))
        ref_o = min(dists)
        rv, rc, rt = dists[ref_o]
        for o, (v, c, t) in dists.items():
            if o == ref_o:
                continue
            same = len(v) == len(rv) and np.array_equal(v, rv) and np.array_equal(c * rt, rc * t)
            if not same:
                mine, theirs = ("x", "y") if party == "A" else ("y", "x")
                failures.append(f"{party}-view differs: {mine}={g // 2}, output={g % 2}, "
                                f"{theirs}={ref_o} vs {theirs}={o}")
                if len(failures) >= limit:
                    return failures
    return failures


def verify_theorem6(p: ProtocolSpec, lam_a, lam_b, *, budget: int = DEFAULT_BUDGET) -> SecureEvalReport:
    """Exact check that outputs follow the tables and views reveal nothing beyond them."""
    ta, tb = as_prob_table(lam_a), as_prob_table(lam_b)
    failures = []
    if p.input_sizes != ta.shape:
        return SecureEvalReport(False, (f"protocol domain {p.input_sizes} differs from table shape {ta.shape}",))
    ca, cb, tables = enumerate_views(p, budget)
    r = p.randomness_size
    for party, got, want in (("A", ca, ta), ("B", cb, tb)):
        for x, row in enumerate(want.probs):
            for y, v in enumerate(row):
                prob = Fraction(int(got[x, y]), r)
                if prob != v:
                    failures.append(f"{party}-output at (x={x}, y={y}) is {prob}, table says {v}")
    for party in "AB":
        failures.extend(_check_independence(tables[party]))
    return SecureEvalReport(not failures, tuple(failures))

"""Type-based decision rules and their exact finite-n statistics.

Each party decides from the joint type of its sample pair alone.  Alice's
rule assigns hypothesis theta to a type Q when

    D(Q || P^theta) <= alpha, or
    D(Q_X || P^theta_X) <= alpha and D(Q_X || P^(1-theta)_X) > alpha, or
    D(Q_X || P^theta_X) <= alpha and D(Q_{Y|X} || P^theta_{Y|X} | Q_X) <= beta,

and 0 when nothing fires.  Bob's rule is the same with the roles of X and Y
exchanged.  Both hypotheses firing on one type is reported as an error.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .dist import (
    EmpiricalType,
    HypothesisPair,
    cond_kl,
    conditional_y_given_x,
    enumerate_compositions,
    enumerate_joint_types,
    kl,
    marginal_x,
    multinomial,
)

__all__ = [
    "DecisionTable",
    "ExponentFit",
    "PrivacyProfile",
    "WellDefinednessError",
    "XTypeRecord",
    "build_table",
    "build_tables",
    "claim_mu_bound",
    "exact_privacy_profile",
    "exact_type_error",
    "exponent_fit",
    "least_mu",
    "sanov_bound",
    "type_probability",
]


class WellDefinednessError(ValueError):
    """Both hypotheses' clauses fire on the same joint type."""

    def __init__(self, side: str, q: EmpiricalType, clauses: dict):
        self.side = side
        self.type = q
        self.clauses = clauses
        super().__init__(f"side {side}: clauses for both hypotheses fire on type {q} ({clauses})")


@dataclass(frozen=True)
class DecisionTable:
    n: int
    side: str
    entries: dict
    alpha: float
    beta: float
    hypotheses: HypothesisPair

    def __getitem__(self, q: EmpiricalType) -> int:
        return self.entries[q]

    def __len__(self):
        return len(self.entries)

    def decide(self, xs: Sequence[int], ys: Sequence[int]) -> int:
        nx, ny = self.hypotheses.shape
        return self.entries[EmpiricalType.of(xs, ys, nx, ny)]

    def prob_one(self, xs: Sequence[int], ys: Sequence[int]) -> Fraction:
        return Fraction(self.decide(xs, ys))

    def matrix(self) -> list[list[int]]:
        """Decisions indexed by whole sequences, rows x^n and columns y^n in product order."""
        nx, ny = self.hypotheses.shape
        xs = list(itertools.product(range(nx), repeat=self.n))
        ys = list(itertools.product(range(ny), repeat=self.n))
        return [[self.decide(a, b) for b in ys] for a in xs]


def _clauses(q: EmpiricalType, h: HypothesisPair, alpha: float, beta: float) -> dict[int, list[str]]:
    """Which clauses fire for each theta, Alice's orientation."""
    pmf = q.as_pmf()
    qx = marginal_x(pmf)
    qyx = conditional_y_given_x(pmf)
    marg = {t: kl(qx, marginal_x(h[t])) for t in (0, 1)}
    fired = {}
    for t in (0, 1):
        hits = []
        if kl(pmf, h[t]) <= alpha:
            hits.append("joint")
        if marg[t] <= alpha and marg[1 - t] > alpha:
            hits.append("marginal")
        if marg[t] <= alpha and cond_kl(qyx, conditional_y_given_x(h[t]), qx) <= beta:
            hits.append("conditional")
        fired[t] = hits
    return fired


def build_table(h: HypothesisPair, alpha: float, beta: float, n: int, side: str = "A") -> DecisionTable:
    """One party's decision table; entries are keyed by types in the original orientation."""
    if side not in ("A", "B"):
        raise ValueError(f"side must be 'A' or 'B', got {side!r}")
    if not h.exact:
        raise TypeError("decision tables need rational hypotheses")
    oriented = h if side == "A" else h.transpose()
    nx, ny = oriented.shape
    entries = {}
    for q in enumerate_joint_types(nx, ny, n):
        fired = _clauses(q, oriented, alpha, beta)
        if fired[0] and fired[1]:
            key = q if side == "A" else q.transpose()
            raise WellDefinednessError(side, key, fired)
        entries[q if side == "A" else q.transpose()] = 1 if fired[1] else 0
    return DecisionTable(n, side, entries, alpha, beta, h)


def build_tables(h: HypothesisPair, alpha: float, beta: float, n: int) -> tuple[DecisionTable, DecisionTable]:
    return build_table(h, alpha, beta, n, "A"), build_table(h, alpha, beta, n, "B")


def type_probability(q: EmpiricalType, p) -> Fraction:
    """P^n of the whole type class of ``q`` under the joint PMF ``p``."""
    prob = Fraction(q.class_size())
    for (x, y), c in zip(p.cells(), q.flat()):
        if c:
            prob *= Fraction(p[x, y]) ** c
            if prob == 0:
                break
    return prob


def exact_type_error(t: DecisionTable, h: HypothesisPair, theta: int, n: int | None = None) -> Fraction:
    """Probability that the table decides ``1 - theta`` when samples follow P^theta."""
    if n is not None and n != t.n:
        raise ValueError(f"table is for n={t.n}, asked for n={n}")
    return sum((type_probability(q, h[theta]) for q, d in t.entries.items() if d != theta), Fraction(0))


def sanov_bound(alpha: float, n: int, cells: int) -> float:
    """2^{-n(alpha - cells*log2(n+1)/n)}; may exceed 1."""
    return 2.0 ** (-(n * alpha - cells * math.log2(n + 1)))


def claim_mu_bound(beta: float, n: int, cells: int) -> float:
    """2 (n+1)^cells 2^{-n beta}; may exceed 1."""
    return 2.0 * (n + 1) ** cells * 2.0 ** (-n * beta)


# ---------------------------------------------------------------------------
# Privacy


def least_mu(pairs: Iterable[tuple[Fraction, Fraction]]) -> Fraction:
    """Infimum of mu with P(TV >= mu) <= mu for a finite (weight, tv) distribution.

    Weights are probabilities summing to at most 1; pairs with zero weight are
    ignored.  With distinct TV values u_1 > ... > u_m (and u_{m+1} = 0), mu in
    (u_{j+1}, u_j] is admissible iff the mass F_j on {TV >= u_j} is <= mu, so
    the infimum over that interval is max(F_j, u_{j+1}) when F_j <= u_j.
    """
    mass: dict[Fraction, Fraction] = {}
    for w, v in pairs:
        if w > 0:
            mass[v] = mass.get(v, 0) + w
    levels = sorted((v for v in mass if v > 0), reverse=True)
    if not levels:
        return Fraction(0)
    best = levels[0]
    cum = 0
    for j, u in enumerate(levels):
        cum += mass[u]
        nxt = levels[j + 1] if j + 1 < len(levels) else Fraction(0)
        if cum <= u:
            best = min(best, max(cum, nxt))
    return best


@dataclass(frozen=True)
class XTypeRecord:
    x_counts: tuple[int, ...]
    weight: Fraction
    split: tuple[Fraction, Fraction]
    tv: tuple[Fraction | None, Fraction | None]
    mu: Fraction

    @property
    def case(self) -> str:
        """'constant' when the decision cannot depend on the other sample."""
        return "constant" if 0 in self.split else "split"


@dataclass(frozen=True)
class PrivacyProfile:
    theta: int
    side: str
    n: int
    per_x_type: tuple[XTypeRecord, ...]
    mu: Fraction


def _oriented(t: DecisionTable):
    """(hypotheses, decision lookup) seen from the deciding party."""
    if t.side == "A":
        return t.hypotheses, lambda q: t.entries[q]
    return t.hypotheses.transpose(), lambda q: t.entries[q.transpose()]


def _conditional_classes(x_counts: Sequence[int], ny: int):
    """Every joint type whose row sums equal ``x_counts``."""
    rows = [list(enumerate_compositions(ny, c)) for c in x_counts]

    def rec(i):
        if i == len(rows):
            yield ()
            return
        for r in rows[i]:
            for rest in rec(i + 1):
                yield (r,) + rest

    for combo in rec(0):
        yield EmpiricalType(combo)


def exact_privacy_profile(t: DecisionTable, h: HypothesisPair | None = None, theta: int = 0,
                          n: int | None = None) -> PrivacyProfile:
    """Exact per-x-type leakage of a deterministic table.

    For an own-sample type the other party's sample is distributed over the
    conditional type classes; within a class all sequences are equally
    likely and share one decision, so every quantity is a sum over classes.
    For Bob's table "x" below refers to Bob's own sample.
    """
    if h is not None and h != t.hypotheses:
        raise ValueError("table was built for different hypotheses")
    if n is not None and n != t.n:
        raise ValueError(f"table is for n={t.n}, asked for n={n}")
    hyp, lookup = _oriented(t)
    p = hyp[theta]
    nx, ny = hyp.shape
    px = marginal_x(p)
    pyx = conditional_y_given_x(p)
    records = []
    for x_counts in enumerate_compositions(nx, t.n):
        weight = Fraction(multinomial(x_counts))
        for x, c in enumerate(x_counts):
            if c:
                weight *= Fraction(px[x]) ** c
        if weight == 0:
            continue
        # (per-sequence probability, class size, decision) for each conditional class
        classes = []
        for q in _conditional_classes(x_counts, ny):
            seq_prob = Fraction(1)
            for x, row in enumerate(q.counts):
                for y, c in enumerate(row):
                    if c:
                        seq_prob *= Fraction(pyx.rows[x][y]) ** c
            if seq_prob == 0:
                continue
            classes.append((seq_prob, q.conditional_class_size(), lookup(q)))
        split = [Fraction(0), Fraction(0)]
        for sp, size, d in classes:
            split[d] += sp * size
        tvs = []
        for i in (0, 1):
            if split[i] == 0:
                tvs.append(None)
                continue
            dist = sum(size * abs((sp / split[i] if d == i else 0) - sp) for sp, size, d in classes) / 2
            tvs.append(dist)
        mu = least_mu((split[i], tvs[i]) for i in (0, 1) if tvs[i] is not None)
        records.append(XTypeRecord(tuple(x_counts), weight, (split[0], split[1]), (tvs[0], tvs[1]), mu))
    overall = max((r.mu for r in records), default=Fraction(0))
    return PrivacyProfile(theta, t.side, t.n, tuple(records), overall)


# ---------------------------------------------------------------------------
# Exponent fits


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    exact_zero: bool = False

    def __str__(self):
        if self.exact_zero:
            return "exact zero, exponent infinite"
        return f"slope {self.slope:.6g} bits/sample"


def exponent_fit(series: Sequence[tuple[int, float | Fraction]]) -> ExponentFit:
    """Least-squares slope of -log2(value) against n."""
    if len(series) < 3:
        raise ValueError("need at least three points")
    if any(v == 0 for _, v in series):
        return ExponentFit(math.inf, math.nan, exact_zero=True)
    if any(v < 0 for _, v in series):
        raise ValueError("values must be positive")
    ns = [float(n) for n, _ in series]
    ys = [-(math.log2(v.numerator) - math.log2(v.denominator)) if isinstance(v, Fraction) else -math.log2(v)
          for _, v in series]
    mn, my = sum(ns) / len(ns), sum(ys) / len(ys)
    sxx = sum((a - mn) ** 2 for a in ns)
    if sxx == 0:
        raise ValueError("all n values coincide")
    slope = sum((a - mn) * (b - my) for a, b in zip(ns, ys)) / sxx
    return ExponentFit(slope, my - slope * mn)

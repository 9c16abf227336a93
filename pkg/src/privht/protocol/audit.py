"""Exact correctness and privacy audits of finite protocols.

Every execution is enumerated once.  For each party we tabulate how many
randomness assignments produce each (own input, own randomness, transcript,
other input) combination.  With integer sequence weights g[x][y] (prior
g/G under a hypothesis) and R joint randomness assignments, a view
v = (x, w, t) has

    S_v  = sum_y g[x][y] * C[v][y]              P(v) = S_v / (G R)
    N_v  = sum_y g[x][y] * |S_v - g_x C[v][y]|  TV_v = N_v / (2 g_x S_v)

where TV_v is the distance between P(y | x) and P(y | v) and g_x is the row
sum.  All of these are integers, so every reported number is exact.

Strict privacy conditions on (own input, own randomness) and asks
P(TV >= mu | x, w) <= mu; weak privacy pools all views.  In both cases the
admissible mu form an up-set per conditioning group, so the least mu is
the largest of the per-group least values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..achievability import least_mu
from ..dist import HypothesisPair
from .engine import DEFAULT_BUDGET, ProtocolError, ProtocolSpec, sequence_prior

__all__ = [
    "AuditReport",
    "ViewTable",
    "audit",
    "enumerate_views",
    "view_statistics",
]

_INT64_SAFE = 1 << 62


@dataclass(frozen=True)
class ViewTable:
    """Aggregated execution counts for one party, sorted by view then other input."""

    party: str
    own: np.ndarray
    rand: np.ndarray
    transcript: np.ndarray
    decision: np.ndarray
    other: np.ndarray
    count: np.ndarray
    own_randomness: int
    total_randomness: int


def _merge(cols: list[list[np.ndarray]], counts: list[np.ndarray]):
    """Sum counts of identical rows across chunks; rows sorted lexicographically."""
    mat = np.concatenate([np.column_stack(c) for c in cols])
    cnt = np.concatenate(counts)
    spans = mat.max(axis=0).astype(object) + 1
    if math.prod(int(s) for s in spans) < _INT64_SAFE:
        key = np.zeros(len(mat), dtype=np.int64)
        for j in range(mat.shape[1]):
            key = key * int(spans[j]) + mat[:, j]
        uniq, first, inv = np.unique(key, return_index=True, return_inverse=True)
        rows = mat[first]
    else:
        rows, inv = np.unique(mat, axis=0, return_inverse=True)
    summed = np.zeros(len(rows), dtype=np.int64)
    np.add.at(summed, inv.reshape(-1), cnt)
    return rows, summed


def enumerate_views(p: ProtocolSpec, budget: int = DEFAULT_BUDGET):
    """One exact pass over every input pair and randomness assignment.

    Returns (count of A deciding 1, count of B deciding 1, {party: ViewTable}).
    """
    mx, my = p.input_sizes
    ca = np.zeros((mx, my), dtype=np.int64)
    cb = np.zeros((mx, my), dtype=np.int64)
    cols = {"A": [], "B": []}
    counts = {"A": [], "B": []}
    for c in p.chunks(budget=budget):
        np.add.at(ca, (c.x, c.y), c.da)
        np.add.at(cb, (c.x, c.y), c.db)
        code = c.transcript_code()
        for party, own, other, rand, dec in (("A", c.x, c.y, c.ra, c.da), ("B", c.y, c.x, c.rb, c.db)):
            w = p.own_index(party, rand)
            m = np.column_stack([own, w, code, dec.astype(np.int64), other])
            u, inv = _fast_unique(m)
            n = np.bincount(inv.reshape(-1), minlength=len(u))
            cols[party].append([u[:, j] for j in range(u.shape[1])])
            counts[party].append(n)
    tables = {}
    for party in "AB":
        rows, summed = _merge(cols[party], counts[party])
        tables[party] = ViewTable(party, rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3], rows[:, 4], summed,
                                  p.own_randomness(party), p.randomness_size)
    return ca, cb, tables


def _fast_unique(m: np.ndarray):
    spans = [int(v) + 1 for v in m.max(axis=0)]
    if math.prod(spans) >= _INT64_SAFE:
        return np.unique(m, axis=0, return_inverse=True)
    key = np.zeros(len(m), dtype=np.int64)
    for j, s in enumerate(spans):
        key = key * s + m[:, j]
    _, first, inv = np.unique(key, return_index=True, return_inverse=True)
    return m[first], inv


# ---------------------------------------------------------------------------
# Per-view statistics


@dataclass(frozen=True)
class ViewStats:
    """One row per view with positive probability under the audited hypothesis."""

    own: np.ndarray
    rand: np.ndarray
    transcript: np.ndarray
    decision: np.ndarray
    s: np.ndarray          # S_v
    n: np.ndarray          # N_v
    g_own: np.ndarray      # g_x for the view's own input
    weight_den: int        # G * R
    group_den: np.ndarray  # denominator of P(t | x, w): g_x * R / R_own

    def tv(self, i: int) -> Fraction:
        return Fraction(int(self.n[i]), 2 * int(self.g_own[i]) * int(self.s[i]))

    def tv_float(self) -> np.ndarray:
        return self.n.astype(float) / (2.0 * self.g_own.astype(float) * self.s.astype(float))


def _weights_for(party: str, g: list[list[int]]):
    """Prior weights oriented as [own][other]."""
    arr = np.array(g, dtype=object)
    return arr if party == "A" else arr.T


def view_statistics(vt: ViewTable, g: list[list[int]], G: int) -> ViewStats:
    w = _weights_for(vt.party, g)
    g_row = [sum(int(v) for v in row) for row in w]
    big = max((int(v) for v in w.flat), default=0)
    bound = big * big * max(1, int(vt.count.max(initial=1))) * max(1, w.shape[1]) * max(1, max(g_row))
    dtype = np.int64 if bound < _INT64_SAFE else object
    wg = np.array(w.tolist(), dtype=dtype)
    grow = np.array(g_row, dtype=dtype)

    # view boundaries: rows are sorted by (own, rand, transcript, decision, other)
    vkey_change = np.ones(len(vt.own), dtype=bool)
    if len(vt.own) > 1:
        vkey_change[1:] = (np.diff(vt.own) != 0) | (np.diff(vt.rand) != 0) | (np.diff(vt.transcript) != 0)
    starts = np.flatnonzero(vkey_change)
    view_id = np.cumsum(vkey_change) - 1

    gxy = wg[vt.own, vt.other]
    cnt = vt.count.astype(dtype)
    contrib = gxy * cnt
    s = np.add.reduceat(contrib, starts) if len(starts) else np.zeros(0, dtype=dtype)
    gx = grow[vt.own[starts]]
    present = np.add.reduceat(gxy, starts) if len(starts) else np.zeros(0, dtype=dtype)
    dev = gxy * np.abs(s[view_id] - gx[view_id] * cnt)
    n = np.add.reduceat(dev, starts) if len(starts) else np.zeros(0, dtype=dtype)
    n = n + s * (gx - present)  # other inputs that never produce this view

    keep = s > 0
    sel = starts[keep]
    r, r_own = vt.total_randomness, vt.own_randomness
    return ViewStats(
        own=vt.own[sel], rand=vt.rand[sel], transcript=vt.transcript[sel], decision=vt.decision[sel],
        s=s[keep], n=n[keep], g_own=gx[keep], weight_den=G * r,
        group_den=gx[keep] * (r // r_own),
    )


def _least_mu_groups(group: np.ndarray, tv: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Float least mu for each group label in ``group`` (rows need not be sorted)."""
    labels, gi = np.unique(group, return_inverse=True)
    out = np.zeros(len(labels))
    pos = tv > 1e-15
    if not pos.any():
        return labels, out
    gi, tv, w = gi[pos], tv[pos], w[pos]
    order = np.lexsort((-tv, gi))
    gi, tv, w = gi[order], tv[order], w[order]
    first = np.ones(len(gi), dtype=bool)
    first[1:] = gi[1:] != gi[:-1]
    starts = np.flatnonzero(first)
    csum = np.cumsum(w)
    offset = csum[starts] - w[starts]
    cum = csum - np.repeat(offset, np.diff(np.append(starts, len(gi))))
    last_of_level = np.ones(len(gi), dtype=bool)
    last_of_level[:-1] = (gi[1:] != gi[:-1]) | (tv[1:] < tv[:-1] * (1 - 1e-12))
    nxt = np.zeros(len(gi))
    nxt[:-1] = np.where(gi[1:] == gi[:-1], tv[1:], 0.0)
    cand = np.where(last_of_level & (cum <= tv * (1 + 1e-12)), np.maximum(cum, nxt), np.inf)
    top = tv[first]
    best = np.minimum.reduceat(cand, starts)
    out[np.unique(gi)] = np.minimum(top, best)
    return labels, out


def _inadmissible_groups(stats: ViewStats, gi: np.ndarray, n_groups: int, mu: Fraction) -> np.ndarray:
    """Groups whose least mu exceeds ``mu``, i.e. P(TV > mu | g) > mu, in integer arithmetic."""
    a, b = mu.numerator, mu.denominator
    num, den = stats.n, 2 * stats.g_own * stats.s
    bound = max(int(num.max()) * b, int(den.max()) * max(a, 1), int(stats.s.sum()) * b,
                int(stats.group_den.max()) * max(a, 1))
    if bound >= _INT64_SAFE or num.dtype == object:
        num, den = num.astype(object), den.astype(object)
        s_arr, gden = stats.s.astype(object), stats.group_den.astype(object)
    else:
        s_arr, gden = stats.s, stats.group_den
    heavy = num * b > den * a  # TV > mu
    mass = np.zeros(n_groups, dtype=s_arr.dtype)
    np.add.at(mass, gi[heavy], s_arr[heavy])
    gd = np.zeros(n_groups, dtype=gden.dtype)
    gd[gi] = gden
    return np.flatnonzero(mass * b > gd * a)


def _strict_mu(stats: ViewStats) -> tuple[Fraction, tuple[int, int] | None]:
    if len(stats.s) == 0:
        return Fraction(0), None
    span = int(stats.rand.max()) + 1
    group = stats.own * span + stats.rand
    w = stats.s.astype(float) / stats.group_den.astype(float)
    labels, mus = _least_mu_groups(group, stats.tv_float(), w)
    if mus.max() <= 0 and not (stats.n > 0).any():
        return Fraction(0), None
    gi = np.searchsorted(labels, group)

    def exact(k: int) -> Fraction:
        idx = np.flatnonzero(gi == k)
        return _least_mu_common(_tv_levels(stats, idx), stats.s[idx], int(stats.group_den[idx[0]]))

    top = int(np.argmax(mus))
    best, where = exact(top), top
    # least mu of a group is <= best exactly when P(TV > best) <= best there
    for k in _inadmissible_groups(stats, gi, len(labels), best):
        mu = exact(int(k))
        if mu > best:
            best, where = mu, int(k)
    lab = int(labels[where])
    return best, (lab // span, lab % span)


def _tv_levels(stats: ViewStats, idx: np.ndarray):
    """Exact TV of the given views as reduced (numerator, denominator) integer pairs."""
    num = stats.n[idx]
    den = 2 * stats.g_own[idx] * stats.s[idx]
    if num.dtype == object:
        pairs = [Fraction(int(a), int(b)) for a, b in zip(num, den)]
        return [(f.numerator, f.denominator) for f in pairs]
    g = np.gcd(num, den)
    return list(zip((num // g).tolist(), (den // g).tolist()))


def _least_mu_common(levels, masses, den: int) -> Fraction:
    """least_mu over views whose weights share one denominator."""
    mass: dict[tuple[int, int], int] = {}
    for lv, m in zip(levels, masses):
        if lv[0]:
            mass[lv] = mass.get(lv, 0) + int(m)
    return least_mu((Fraction(m, den), Fraction(*lv)) for lv, m in mass.items())


def _weak_mu(stats: ViewStats) -> Fraction:
    if len(stats.s) == 0:
        return Fraction(0)
    idx = np.flatnonzero(stats.n > 0)
    return _least_mu_common(_tv_levels(stats, idx), stats.s[idx], stats.weight_den)


def _averaged_tv(stats: ViewStats, own_size: int, g_row: list[int], G: int, R: int):
    """View-averaged TV, globally and for each own input."""
    per_input = []
    total = Fraction(0)
    for x in range(own_size):
        sel = stats.own == x
        if g_row[x] == 0:
            per_input.append(None)
            continue
        num = sum(int(v) for v in stats.n[sel])
        per_input.append(Fraction(num, 2 * R * g_row[x] * g_row[x]))
        total += Fraction(num, 2 * G * R * g_row[x])
    return total, tuple(per_input)


# ---------------------------------------------------------------------------
# Report


@dataclass(frozen=True)
class AuditReport:
    protocol: str
    n: int
    delta: dict            # party -> theta -> Fraction
    mu_strict: dict        # party -> theta -> Fraction
    mu_weak: dict          # party -> theta -> Fraction
    worst_group: dict      # party -> theta -> (own input, own randomness index) or None
    avg_tv: dict           # party -> theta -> Fraction (averaged over own input too)
    avg_tv_per_input: dict  # party -> theta -> tuple of Fraction | None, one per own input
    curves: dict = field(default_factory=dict, repr=False)

    @property
    def delta_max(self) -> Fraction:
        return max(v for d in self.delta.values() for v in d.values())

    def mu(self, definition: str = "strict") -> Fraction:
        table = self.mu_strict if definition == "strict" else self.mu_weak
        return max(v for d in table.values() for v in d.values())

    def to_dict(self) -> dict:
        def conv(v):
            if isinstance(v, Fraction):
                return str(v)
            if isinstance(v, dict):
                return {str(k): conv(x) for k, x in v.items()}
            if isinstance(v, (tuple, list)):
                return [conv(x) for x in v]
            return v

        out = {
            "protocol": self.protocol,
            "n": self.n,
            "delta": conv(self.delta),
            "mu_strict": conv(self.mu_strict),
            "mu_weak": conv(self.mu_weak),
            "worst_group": conv(self.worst_group),
            "avg_tv": conv(self.avg_tv),
            "avg_tv_per_input": conv(self.avg_tv_per_input),
            "summary": {"delta": str(self.delta_max), "mu_strict": str(self.mu("strict")),
                        "mu_weak": str(self.mu("weak"))},
        }
        if self.curves:
            out["curves"] = conv(self.curves)
        return out


def audit(p: ProtocolSpec, h: HypothesisPair, n: int, *, budget: int = DEFAULT_BUDGET,
          keep_curves: bool = False) -> AuditReport:
    """Exact error probabilities and least strict/weak privacy parameters."""
    nx, ny = h.shape
    if p.input_sizes != (nx ** n, ny ** n):
        raise ProtocolError(f"protocol domain {p.input_sizes} does not match sample size n={n} "
                            f"over {nx}x{ny} alphabets ({nx ** n}, {ny ** n})")
    ca, cb, tables = enumerate_views(p, budget)
    R = p.randomness_size
    delta, mu_s, mu_w, worst, avg, avg_in, curves = ({"A": {}, "B": {}} for _ in range(7))
    for theta in (0, 1):
        g, G = sequence_prior(h, n, theta)
        garr = np.array(g, dtype=object)
        for party, ones in (("A", ca), ("B", cb)):
            # P(decide != theta) = sum g * (#wrong) / (G R)
            wrong = ones if theta == 0 else R - ones
            delta[party][theta] = Fraction(int(sum(int(a) * int(b) for a, b in zip(garr.flat, wrong.flat))), G * R)
            stats = view_statistics(tables[party], g, G)
            mu_s[party][theta], worst[party][theta] = _strict_mu(stats)
            mu_w[party][theta] = _weak_mu(stats)
            oriented = garr if party == "A" else garr.T
            g_row = [sum(int(v) for v in row) for row in oriented]
            avg[party][theta], avg_in[party][theta] = _averaged_tv(stats, len(g_row), g_row, G, R)
            if keep_curves:
                curves[party][theta] = [
                    {"input": int(stats.own[i]), "randomness": int(stats.rand[i]),
                     "transcript": int(stats.transcript[i]),
                     "weight": Fraction(int(stats.s[i]), stats.weight_den), "tv": stats.tv(i)}
                    for i in range(len(stats.s))
                ]
    return AuditReport(p.name, n, delta, mu_s, mu_w, worst, avg, avg_in, curves if keep_curves else {})

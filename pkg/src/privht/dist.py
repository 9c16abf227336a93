"""Finite-alphabet probability machinery.

PMFs over a product alphabet, divergences in bits, total variation,
enumeration of empirical types and the type-class probability bounds
used throughout the exponent analysis.

Two numeric modes coexist.  Rational PMFs hold :class:`fractions.Fraction`
entries and give bit-exact results; their divergences come back as a
:class:`Divergence`, a symbolic sum ``sum(c * log2(r))`` that is only turned
into a float when compared.  Float PMFs hold Python floats and divergences
are plain floats (``math.inf`` on support violation).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

__all__ = [
    "COMPARE_TOL",
    "Alphabet",
    "CondPMF",
    "Divergence",
    "EmpiricalType",
    "HypothesisPair",
    "JointPMF",
    "LogBounds",
    "cond_kl",
    "cond_type_class_prob",
    "cond_type_class_prob_bounds",
    "conditional_x_given_y",
    "conditional_y_given_x",
    "count_joint_types",
    "entropy",
    "enumerate_compositions",
    "enumerate_joint_types",
    "kl",
    "log2_rational",
    "marginal_x",
    "marginal_y",
    "multinomial",
    "parse_probability",
    "tv",
    "type_class_size_bounds",
]

Number = Union[Fraction, float]

# Divergences in rational mode are compared against thresholds with this slack.
COMPARE_TOL = 1e-9
# Float PMFs are renormalized when their sum is this close to one.
FLOAT_SUM_TOL = 1e-9


def parse_probability(value) -> Fraction:
    """Parse ``"a/b"``, a decimal string, an int or a Fraction exactly."""
    if isinstance(value, bool):
        raise TypeError("booleans are not probabilities")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a rational or decimal string: {value!r}") from exc
    raise TypeError(f"cannot parse probability from {type(value).__name__}")


def log2_rational(r: Fraction) -> float:
    """log2 of a positive rational, accurate even for huge numerators."""
    if r <= 0:
        raise ValueError("log2 of a non-positive number")
    return math.log2(r.numerator) - math.log2(r.denominator)


def _is_exact(x) -> bool:
    return isinstance(x, Rational)


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(str(s) for s in self.symbols))
        if not self.symbols:
            raise ValueError("alphabet must be non-empty")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError(f"alphabet symbols are not distinct: {self.symbols}")

    @property
    def size(self) -> int:
        return len(self.symbols)

    @classmethod
    def of_size(cls, k: int) -> "Alphabet":
        return cls(tuple(str(i) for i in range(k)))


class Divergence:
    """Exact-form divergence ``sum_i coef_i * log2(ratio_i)`` in bits.

    ``coef`` and ``ratio`` are positive rationals.  Comparisons against plain
    numbers evaluate the sum in floating point with slack ``COMPARE_TOL`` so
    that a divergence which is mathematically equal to a threshold counts
    as ``<=`` it.  ``==`` between two divergences is exact.
    """

    __slots__ = ("terms", "infinite", "_value")

    def __init__(self, terms: Iterable[tuple[Fraction, Fraction]] = (), infinite: bool = False):
        merged: dict[Fraction, Fraction] = {}
        if not infinite:
            for coef, ratio in terms:
                if coef == 0 or ratio == 1:
                    continue
                merged[ratio] = merged.get(ratio, Fraction(0)) + coef
        self.terms = tuple(sorted((c, r) for r, c in merged.items() if c != 0))
        self.infinite = bool(infinite)
        self._value = None

    @classmethod
    def inf(cls) -> "Divergence":
        return cls(infinite=True)

    @property
    def value(self) -> float:
        if self._value is None:
            if self.infinite:
                self._value = math.inf
            else:
                self._value = math.fsum(float(c) * log2_rational(r) for c, r in self.terms)
        return self._value

    def __float__(self) -> float:
        return self.value

    def is_zero(self) -> bool:
        return not self.infinite and self._power_product() == 1

    def __add__(self, other):
        if isinstance(other, Divergence):
            if self.infinite or other.infinite:
                return Divergence.inf()
            return Divergence(self.terms + other.terms)
        return NotImplemented

    def __mul__(self, k):
        if not isinstance(k, (int, Fraction)) or k < 0:
            return NotImplemented
        if self.infinite:
            return Divergence.inf() if k else Divergence()
        return Divergence((Fraction(k) * c, r) for c, r in self.terms)

    __rmul__ = __mul__

    def _power_product(self, max_exponent: int = 200_000):
        # prod(ratio ** coef) raised to the lcm of the coefficient denominators
        lcm = 1
        for c, _ in self.terms:
            lcm = lcm * c.denominator // math.gcd(lcm, c.denominator)
        out = Fraction(1)
        for c, r in self.terms:
            e = int(c * lcm)
            if abs(e) > max_exponent:
                return None
            out *= r ** e
        return out

    def __eq__(self, other):
        if isinstance(other, Divergence):
            if self.infinite or other.infinite:
                return self.infinite == other.infinite
            diff = Divergence(self.terms + tuple((-c, r) for c, r in other.terms))
            prod = diff._power_product()
            if prod is None:
                return abs(self.value - other.value) <= COMPARE_TOL
            return prod == 1
        if isinstance(other, (int, float, Fraction)):
            return abs(self.value - float(other)) <= COMPARE_TOL if not self.infinite else other == math.inf
        return NotImplemented

    def __hash__(self):
        return hash((self.terms, self.infinite))

    def __le__(self, other):
        return self.value <= float(other) + COMPARE_TOL

    def __gt__(self, other):
        return not self.__le__(other)

    def __lt__(self, other):
        return self.value < float(other) - COMPARE_TOL

    def __ge__(self, other):
        return not self.__lt__(other)

    def __repr__(self):
        if self.infinite:
            return "Divergence(inf)"
        return f"Divergence({self.value:.12g} bits, {len(self.terms)} terms)"


def _check_matrix(rows) -> tuple[tuple[Number, ...], ...]:
    rows = tuple(tuple(r) for r in rows)
    if not rows or not rows[0]:
        raise ValueError("empty probability matrix")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError("ragged probability matrix")
    return rows


def _normalize_entries(entries: Sequence) -> tuple[tuple, bool]:
    """Validate a flat entry list; returns (entries, exact)."""
    exact = all(_is_exact(v) or isinstance(v, str) for v in entries)
    if exact:
        vals = tuple(parse_probability(v) if isinstance(v, str) else Fraction(v) for v in entries)
        if any(v < 0 for v in vals):
            raise ValueError("negative probability")
        if sum(vals) != 1:
            raise ValueError(f"rational masses must sum to exactly 1, got {sum(vals)}")
        return vals, True
    vals = tuple(float(parse_probability(v)) if isinstance(v, str) else float(v) for v in entries)
    if any(v < 0 or math.isnan(v) for v in vals):
        raise ValueError("negative or NaN probability")
    total = math.fsum(vals)
    if abs(total - 1.0) > FLOAT_SUM_TOL:
        raise ValueError(f"float masses sum to {total}, not within {FLOAT_SUM_TOL} of 1")
    return tuple(v / total for v in vals), False


@dataclass(frozen=True, eq=True)
class JointPMF:
    """PMF over an nx-by-ny product alphabet; row index is x, column is y."""

    mass: tuple[tuple[Number, ...], ...]

    def __init__(self, mass, *, _validated: bool = False):
        rows = _check_matrix(mass)
        if not _validated:
            flat, _ = _normalize_entries([v for r in rows for v in r])
            ny = len(rows[0])
            rows = tuple(tuple(flat[i * ny:(i + 1) * ny]) for i in range(len(rows)))
        object.__setattr__(self, "mass", rows)

    @property
    def nx(self) -> int:
        return len(self.mass)

    @property
    def ny(self) -> int:
        return len(self.mass[0])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def exact(self) -> bool:
        return isinstance(self.mass[0][0], Fraction)

    def __getitem__(self, xy):
        x, y = xy
        return self.mass[x][y]

    def cells(self) -> Iterator[tuple[int, int]]:
        return itertools.product(range(self.nx), range(self.ny))

    def flat(self) -> tuple[Number, ...]:
        return tuple(v for r in self.mass for v in r)

    def array(self) -> np.ndarray:
        return np.array([[float(v) for v in r] for r in self.mass], dtype=float)

    def support(self) -> frozenset[tuple[int, int]]:
        return frozenset((x, y) for x, y in self.cells() if self.mass[x][y] > 0)

    def transpose(self) -> "JointPMF":
        return JointPMF(tuple(zip(*self.mass)), _validated=True)

    def to_float(self) -> "JointPMF":
        return JointPMF(tuple(tuple(float(v) for v in r) for r in self.mass), _validated=True)

    @classmethod
    def from_array(cls, arr) -> "JointPMF":
        return cls(np.asarray(arr, dtype=float).tolist())

    @classmethod
    def product(cls, px: Sequence, py: Sequence) -> "JointPMF":
        return cls([[a * b for b in py] for a in px])

    def __repr__(self):
        def fmt(v):
            return str(v) if isinstance(v, Fraction) else f"{v:.6g}"
        body = "; ".join(", ".join(fmt(v) for v in r) for r in self.mass)
        return f"JointPMF([{body}])"


@dataclass(frozen=True)
class CondPMF:
    """Rows ``P(. | x)``; a row is ``None`` where the conditioning mass is zero."""

    rows: tuple[tuple[Number, ...] | None, ...]

    @property
    def nx(self) -> int:
        return len(self.rows)

    @property
    def ny(self) -> int:
        for r in self.rows:
            if r is not None:
                return len(r)
        raise ValueError("conditional PMF has no defined rows")

    def __getitem__(self, xy):
        x, y = xy
        row = self.rows[x]
        if row is None:
            raise KeyError(f"row {x} is undefined")
        return row[y]

    def defined(self, x: int) -> bool:
        return self.rows[x] is not None


@dataclass(frozen=True)
class HypothesisPair:
    """The null ``p0`` and alternate ``p1`` joint distributions."""

    p0: JointPMF
    p1: JointPMF
    alphabet_x: Alphabet | None = None
    alphabet_y: Alphabet | None = None

    def __post_init__(self):
        if self.p0.shape != self.p1.shape:
            raise ValueError(f"hypotheses have different shapes {self.p0.shape} vs {self.p1.shape}")
        if self.alphabet_x is None:
            object.__setattr__(self, "alphabet_x", Alphabet.of_size(self.p0.nx))
        if self.alphabet_y is None:
            object.__setattr__(self, "alphabet_y", Alphabet.of_size(self.p0.ny))
        if self.alphabet_x.size != self.p0.nx or self.alphabet_y.size != self.p0.ny:
            raise ValueError("alphabet sizes do not match the PMF dimensions")

    def __getitem__(self, theta: int) -> JointPMF:
        if theta == 0:
            return self.p0
        if theta == 1:
            return self.p1
        raise IndexError(f"hypothesis index must be 0 or 1, got {theta}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.p0.shape

    @property
    def exact(self) -> bool:
        return self.p0.exact and self.p1.exact

    def transpose(self) -> "HypothesisPair":
        return HypothesisPair(self.p0.transpose(), self.p1.transpose(), self.alphabet_y, self.alphabet_x)

    def to_float(self) -> "HypothesisPair":
        return HypothesisPair(self.p0.to_float(), self.p1.to_float(), self.alphabet_x, self.alphabet_y)


def _zero_like(v):
    return Fraction(0) if isinstance(v, Fraction) else 0.0


def marginal_x(p: JointPMF) -> tuple[Number, ...]:
    return tuple(sum(row, _zero_like(row[0])) for row in p.mass)


def marginal_y(p: JointPMF) -> tuple[Number, ...]:
    return tuple(sum(col, _zero_like(col[0])) for col in zip(*p.mass))


def conditional_y_given_x(p: JointPMF) -> CondPMF:
    px = marginal_x(p)
    rows = []
    for x, row in enumerate(p.mass):
        rows.append(None if px[x] == 0 else tuple(v / px[x] for v in row))
    return CondPMF(tuple(rows))


def conditional_x_given_y(p: JointPMF) -> CondPMF:
    """Rows indexed by y: ``P(. | y)`` over x."""
    return conditional_y_given_x(p.transpose())


def _as_flat(p) -> tuple:
    if isinstance(p, JointPMF):
        return p.flat()
    if isinstance(p, EmpiricalType):
        return p.as_pmf().flat()
    if isinstance(p, np.ndarray):
        return tuple(p.ravel().tolist())
    flat = []
    for v in p:
        if isinstance(v, (tuple, list)):
            flat.extend(v)
        else:
            flat.append(v)
    return tuple(flat)


def _shape_of(p):
    if isinstance(p, (JointPMF, EmpiricalType)):
        return p.shape
    return np.shape(np.asarray(p, dtype=object))


def kl(q, p):
    """D(q || p) in bits.

    ``q`` and ``p`` may be JointPMFs, EmpiricalTypes or flat/nested
    sequences of the same shape.  Exact inputs give a :class:`Divergence`,
    float inputs give a float.  Mass of ``q`` outside the support of ``p``
    yields infinity.
    """
    if _shape_of(q) != _shape_of(p):
        raise ValueError(f"dimension mismatch: {_shape_of(q)} vs {_shape_of(p)}")
    qf, pf = _as_flat(q), _as_flat(p)
    if all(_is_exact(v) for v in qf + pf):
        terms = []
        for qi, pi in zip(qf, pf):
            qi, pi = Fraction(qi), Fraction(pi)
            if qi == 0:
                continue
            if pi == 0:
                return Divergence.inf()
            terms.append((qi, qi / pi))
        return Divergence(terms)
    total = 0.0
    for qi, pi in zip(qf, pf):
        qi, pi = float(qi), float(pi)
        if qi == 0.0:
            continue
        if pi == 0.0:
            return math.inf
        total += qi * math.log2(qi / pi)
    return max(total, 0.0)


def cond_kl(q_yx: CondPMF, p_yx: CondPMF, q_x: Sequence):
    """sum_x q_x(x) * D(q_yx(.|x) || p_yx(.|x)) in bits.

    A row of ``p_yx`` that is undefined where ``q_x`` puts mass makes the
    divergence infinite.  A row of ``q_yx`` undefined there is an error.
    """
    if len(q_x) != q_yx.nx or q_yx.nx != p_yx.nx:
        raise ValueError("dimension mismatch between conditionals and marginal")
    exact = all(_is_exact(v) for v in q_x)
    acc = Divergence() if exact else 0.0
    for x, w in enumerate(q_x):
        if w == 0:
            continue
        if q_yx.rows[x] is None:
            raise ValueError(f"conditional row {x} undefined where the marginal is positive")
        if p_yx.rows[x] is None:
            return Divergence.inf() if exact else math.inf
        d = kl(q_yx.rows[x], p_yx.rows[x])
        if exact:
            if isinstance(d, float):
                raise TypeError("mixed exact and float inputs")
            acc = acc + Fraction(w) * d
        else:
            if d == math.inf or (isinstance(d, Divergence) and d.infinite):
                return math.inf
            acc += float(w) * float(d)
    return acc


def tv(p, q):
    """Total variation distance (1/2) * sum |p - q|; exact for rational inputs."""
    if _shape_of(p) != _shape_of(q):
        raise ValueError(f"dimension mismatch: {_shape_of(p)} vs {_shape_of(q)}")
    pf, qf = _as_flat(p), _as_flat(q)
    if all(_is_exact(v) for v in pf + qf):
        return sum((abs(Fraction(a) - Fraction(b)) for a, b in zip(pf, qf)), Fraction(0)) / 2
    return 0.5 * math.fsum(abs(float(a) - float(b)) for a, b in zip(pf, qf))


def entropy(p: Sequence) -> float:
    """Shannon entropy in bits of a flat PMF or count vector (normalized)."""
    vals = [float(v) for v in _as_flat(p)]
    total = math.fsum(vals)
    return -math.fsum(v / total * math.log2(v / total) for v in vals if v > 0)


# ---------------------------------------------------------------------------
# Types


def multinomial(counts: Iterable[int]) -> int:
    counts = list(counts)
    out = math.factorial(sum(counts))
    for c in counts:
        out //= math.factorial(c)
    return out


def enumerate_compositions(k: int, n: int) -> Iterator[tuple[int, ...]]:
    """All length-k non-negative integer vectors summing to n, in lexicographic order."""
    if k < 1:
        raise ValueError("need at least one part")
    if k == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in enumerate_compositions(k - 1, n - first):
            yield (first,) + rest


@dataclass(frozen=True)
class EmpiricalType:
    """Count matrix of a sequence pair; entries sum to ``n``."""

    counts: tuple[tuple[int, ...], ...]

    def __init__(self, counts):
        rows = tuple(tuple(int(c) for c in r) for r in counts)
        if not rows or not rows[0] or any(len(r) != len(rows[0]) for r in rows):
            raise ValueError("counts must be a non-empty rectangular matrix")
        if any(c < 0 for r in rows for c in r):
            raise ValueError("negative count")
        object.__setattr__(self, "counts", rows)

    @property
    def n(self) -> int:
        return sum(sum(r) for r in self.counts)

    @property
    def nx(self) -> int:
        return len(self.counts)

    @property
    def ny(self) -> int:
        return len(self.counts[0])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def flat(self) -> tuple[int, ...]:
        return tuple(c for r in self.counts for c in r)

    def as_pmf(self) -> JointPMF:
        n = self.n
        if n == 0:
            raise ValueError("empty type")
        return JointPMF(tuple(tuple(Fraction(c, n) for c in r) for r in self.counts), _validated=True)

    def x_counts(self) -> tuple[int, ...]:
        return tuple(sum(r) for r in self.counts)

    def y_counts(self) -> tuple[int, ...]:
        return tuple(sum(c) for c in zip(*self.counts))

    def transpose(self) -> "EmpiricalType":
        return EmpiricalType(tuple(zip(*self.counts)))

    def class_size(self) -> int:
        """Number of sequence pairs with exactly this joint type."""
        return multinomial(self.flat())

    def conditional_class_size(self) -> int:
        """Number of y^n completing a fixed x^n of the matching x-type."""
        out = 1
        for row in self.counts:
            out *= multinomial(row)
        return out

    @classmethod
    def of(cls, xs: Sequence[int], ys: Sequence[int], nx: int, ny: int) -> "EmpiricalType":
        if len(xs) != len(ys):
            raise ValueError("sequences differ in length")
        m = [[0] * ny for _ in range(nx)]
        for a, b in zip(xs, ys):
            m[a][b] += 1
        return cls(m)

    @classmethod
    def parse(cls, text: str) -> "EmpiricalType":
        """Parse ``"1,1;0,2"`` (rows separated by ';'), optionally prefixed ``counts=``."""
        text = text.strip()
        if text.startswith("counts="):
            text = text[len("counts="):]
        return cls([[int(v) for v in row.split(",")] for row in text.split(";")])

    def __str__(self):
        return ";".join(",".join(str(c) for c in r) for r in self.counts)


def count_joint_types(nx: int, ny: int, n: int) -> int:
    k = nx * ny
    return math.comb(n + k - 1, k - 1)


def enumerate_joint_types(nx: int, ny: int, n: int, start: int = 0, stop: int | None = None) -> Iterator[EmpiricalType]:
    """Every joint type with denominator n, lexicographic on the flattened counts.

    ``start``/``stop`` select a slice of the stream so that disjoint ranges
    can be handed to separate consumers.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    stream = enumerate_compositions(nx * ny, n)
    for flat in itertools.islice(stream, start, stop):
        yield EmpiricalType([flat[i * ny:(i + 1) * ny] for i in range(nx)])


@dataclass(frozen=True)
class LogBounds:
    """A log2-domain sandwich ``lower <= exact <= upper``; -inf encodes probability 0."""

    lower: float
    upper: float
    exact: float | None = None

    def contains(self, value: float | None = None, tol: float = 1e-9) -> bool:
        v = self.exact if value is None else value
        if v == -math.inf:
            return self.lower == -math.inf
        return self.lower - tol <= v <= self.upper + tol


def type_class_size_bounds(counts: Sequence[int], n: int | None = None) -> LogBounds:
    """Bounds on log2 |T(Q)| for a marginal type given by its count vector."""
    counts = tuple(int(c) for c in _as_flat(counts))
    total = sum(counts)
    if n is None:
        n = total
    if total != n:
        raise ValueError(f"counts sum to {total}, expected {n}")
    h = entropy(counts)
    size = multinomial(counts)
    return LogBounds(lower=n * h - len(counts) * math.log2(n + 1), upper=n * h, exact=math.log2(size))


def _cond_rows_of(q: EmpiricalType) -> CondPMF:
    rows = []
    for r in q.counts:
        s = sum(r)
        rows.append(None if s == 0 else tuple(Fraction(c, s) for c in r))
    return CondPMF(tuple(rows))


def cond_type_class_prob(q: EmpiricalType, p_yx: CondPMF, method: str = "formula") -> Fraction:
    """P(Y^n completes the joint type q | X^n = x^n) for any x^n of q's x-type.

    ``method="enumerate"`` sums P(y^n | x^n) over every y^n explicitly, for a
    canonical x^n (symbols in increasing order); ``"formula"`` uses the
    closed form |T(q|x^n)| * prod P(y|x)^count.
    """
    if q.nx != p_yx.nx:
        raise ValueError("dimension mismatch")
    if method == "formula":
        prob = Fraction(q.conditional_class_size())
        for x, row in enumerate(q.counts):
            for y, c in enumerate(row):
                if c == 0:
                    continue
                if p_yx.rows[x] is None:
                    return Fraction(0)
                prob *= Fraction(p_yx.rows[x][y]) ** c
        return prob
    if method != "enumerate":
        raise ValueError(f"unknown method {method!r}")
    xs = [x for x, cnt in enumerate(q.x_counts()) for _ in range(cnt)]
    ny = q.ny
    total = Fraction(0)
    for ys in itertools.product(range(ny), repeat=len(xs)):
        if EmpiricalType.of(xs, ys, q.nx, ny) != q:
            continue
        pr = Fraction(1)
        for a, b in zip(xs, ys):
            if p_yx.rows[a] is None:
                pr = Fraction(0)
                break
            pr *= Fraction(p_yx.rows[a][b])
        total += pr
    return total


def cond_type_class_prob_bounds(q: EmpiricalType, p_yx: CondPMF, method: str = "formula") -> LogBounds:
    """The sandwich ``2^{-n(D + |XxY| log2(2n)/n)} <= P <= 2^{-nD}`` in log2 form.

    D is the conditional divergence of q's conditional type from ``p_yx``,
    averaged over q's x-marginal.  On a support violation both bounds and the
    exact value are -inf.
    """
    n = q.n
    pmf = q.as_pmf()
    d = cond_kl(_cond_rows_of(q), p_yx, marginal_x(pmf))
    exact = cond_type_class_prob(q, p_yx, method=method)
    log_exact = -math.inf if exact == 0 else log2_rational(exact)
    if d.infinite:
        return LogBounds(-math.inf, -math.inf, log_exact)
    k = q.nx * q.ny
    return LogBounds(lower=-n * d.value - k * math.log2(2 * n), upper=-n * d.value, exact=log_exact)

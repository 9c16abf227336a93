"""Achievability of correctness/privacy exponent pairs.

A pair (alpha, beta) is achievable exactly when none of five convex
feasibility problems over joint distributions Q has a solution.  Each
problem is a list of divergence constraints; those capped by ``alpha`` are
collected as the "alpha side" and those capped by ``beta`` as the "beta side".

For a fixed alpha a condition has a threshold

    beta_c(alpha) = min { max(beta-side values at Q) : alpha-side values at Q <= alpha }

and it is feasible at (alpha, beta) iff beta_c(alpha) <= beta.  Thresholds are
computed once per (hypotheses, condition, alpha) and cached, which makes the
bisection in :func:`trace_boundary` cheap.  Each optimization starts on a
simplex grid over the common support of both hypotheses (any Q leaving it has
an infinite divergence in every condition) and is refined with SLSQP in
epigraph form.  Witnesses are rounded to rationals and re-checked exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .dist import (
    HypothesisPair,
    JointPMF,
    cond_kl,
    conditional_x_given_y,
    conditional_y_given_x,
    kl,
    marginal_x,
    marginal_y,
)

__all__ = [
    "BETA_PROBE",
    "CONDITIONS",
    "BoundaryPoint",
    "ExponentPair",
    "FeasibilityResult",
    "FeasibilityWitness",
    "RegionBoundary",
    "Verdict",
    "beta_threshold",
    "check_witness",
    "chernoff_cap",
    "condition_feasible",
    "is_achievable",
    "parse_grid",
    "trace_boundary",
]

CONDITIONS = ("I", "II", "III", "IV", "V")
FEAS_TOL = 1e-7
BISECT_TOL = 1e-4
# Upper probe for bisection on beta; still achievable here means "unbounded".
BETA_PROBE = 64.0
DEFAULT_GRID = 40
GRID_BUDGET = 20_000
WITNESS_DENOMINATOR = 10**12

_LN2 = math.log(2.0)
_TINY = 1e-300


@dataclass(frozen=True)
class ExponentPair:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be finite and non-negative, got {self.alpha}")
        if not self.beta >= 0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")


@dataclass(frozen=True)
class FeasibilityWitness:
    condition_id: str
    theta: int | None
    q: JointPMF
    slack: dict = field(compare=False)

    def flat_q(self) -> str:
        return ";".join(str(v) for v in self.q.flat())


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    condition_id: str
    witness: FeasibilityWitness | None
    # Max over constraints of (value - cap) for the best candidate; <= tol when feasible.
    violation: float

    def __bool__(self):
        return self.feasible


@dataclass(frozen=True)
class Verdict:
    alpha: float
    beta: float
    achievable: bool
    witness: FeasibilityWitness | None

    def __bool__(self):
        return self.achievable


@dataclass(frozen=True)
class BoundaryPoint:
    alpha: float
    beta_star: float | None
    status: str  # "bounded", "unbounded" or "undefined"
    binding_condition: str | None
    witness: FeasibilityWitness | None


@dataclass(frozen=True)
class RegionBoundary:
    points: tuple[BoundaryPoint, ...]
    cap: float
    beta_tol: float
    grid: int
    quantifier: str

    def betas(self) -> list[float | None]:
        return [p.beta_star for p in self.points]


# ---------------------------------------------------------------------------
# Vectorized divergences over the common support


class _Geometry:
    """Float view of a hypothesis pair restricted to the common support."""

    def __init__(self, h: HypothesisPair):
        p = [h.p0.array(), h.p1.array()]
        mask = (p[0] > 0) & (p[1] > 0)
        self.shape = h.shape
        self.cells = [tuple(int(v) for v in c) for c in np.argwhere(mask)]
        self.m = len(self.cells)
        nx, ny = h.shape
        xs = np.array([c[0] for c in self.cells], dtype=int)
        ys = np.array([c[1] for c in self.cells], dtype=int)
        self.ax = np.zeros((self.m, nx))
        self.ay = np.zeros((self.m, ny))
        self.ax[np.arange(self.m), xs] = 1.0
        self.ay[np.arange(self.m), ys] = 1.0
        self.xs, self.ys = xs, ys
        with np.errstate(divide="ignore"):
            self.logp = [np.log2(pt[xs, ys]) for pt in p]
            self.logpx = [np.log2(pt.sum(axis=1)) for pt in p]
            self.logpy = [np.log2(pt.sum(axis=0)) for pt in p]

    def values(self, q: np.ndarray) -> dict[str, np.ndarray]:
        """All divergence families for a batch q of shape (B, m)."""
        q = np.atleast_2d(q)
        qx = q @ self.ax
        qy = q @ self.ay
        out = {}
        lq = np.log2(np.maximum(q, _TINY))
        lqx = np.log2(np.maximum(qx, _TINY))
        lqy = np.log2(np.maximum(qy, _TINY))
        for t in (0, 1):
            d = np.where(q > 0, q * (lq - self.logp[t]), 0.0).sum(axis=1)
            dx = np.where(qx > 0, qx * (lqx - np.where(np.isfinite(self.logpx[t]), self.logpx[t], 0.0)), 0.0).sum(axis=1)
            dy = np.where(qy > 0, qy * (lqy - np.where(np.isfinite(self.logpy[t]), self.logpy[t], 0.0)), 0.0).sum(axis=1)
            out[f"D{t}"] = np.maximum(d, 0.0)
            out[f"DX{t}"] = np.maximum(dx, 0.0)
            out[f"DY{t}"] = np.maximum(dy, 0.0)
            out[f"CX{t}"] = np.maximum(d - dx, 0.0)
            out[f"CY{t}"] = np.maximum(d - dy, 0.0)
        return out

    def _pieces(self, q: np.ndarray):
        qx, qy = q @ self.ax, q @ self.ay
        safe = lambda v: np.log2(np.maximum(v, _TINY))
        return qx, qy, safe(q), safe(qx), safe(qy)

    def point(self, names: Sequence[str], q: np.ndarray) -> np.ndarray:
        """Values of the named divergences at a single q."""
        qx, qy, lq, lqx, lqy = self._pieces(q)
        cache = {}
        out = np.empty(len(names))
        for i, name in enumerate(names):
            t, kind = int(name[-1]), name[:-1]
            if ("D", t) not in cache:
                cache["D", t] = float(np.dot(q, lq - self.logp[t]))
            d = cache["D", t]
            if kind == "D":
                out[i] = d
                continue
            if kind[1] == "X":
                marg = float(np.dot(qx, lqx - self._finite(self.logpx[t])))
            else:
                marg = float(np.dot(qy, lqy - self._finite(self.logpy[t])))
            out[i] = marg if kind[0] == "D" else d - marg
        return np.maximum(out, 0.0)

    def point_jacobian(self, names: Sequence[str], q: np.ndarray) -> np.ndarray:
        qx, qy, lq, lqx, lqy = self._pieces(q)
        g_joint = {}
        rows = []
        for name in names:
            t, kind = int(name[-1]), name[:-1]
            if t not in g_joint:
                g_joint[t] = lq + 1.0 / _LN2 - self.logp[t]
            if kind == "D":
                rows.append(g_joint[t])
                continue
            if kind[1] == "X":
                gm = (lqx + 1.0 / _LN2 - self._finite(self.logpx[t]))[self.xs]
            else:
                gm = (lqy + 1.0 / _LN2 - self._finite(self.logpy[t]))[self.ys]
            rows.append(gm if kind[0] == "D" else g_joint[t] - gm)
        return np.array(rows)

    @staticmethod
    def _finite(v: np.ndarray) -> np.ndarray:
        return np.where(np.isfinite(v), v, 0.0)


@lru_cache(maxsize=64)
def _geometry(h: HypothesisPair) -> _Geometry:
    return _Geometry(h)


def _compositions(m: int, n: int) -> np.ndarray:
    if m == 1:
        return np.array([[n]])
    parts = [np.column_stack([np.full(len(rest), first), rest])
             for first in range(n + 1)
             for rest in [_compositions(m - 1, n - first)]]
    return np.vstack(parts)


@lru_cache(maxsize=16)
def _simplex_grid(m: int, n_max: int) -> np.ndarray:
    n = n_max
    while n > 1 and math.comb(n + m - 1, m - 1) > GRID_BUDGET:
        n -= 1
    pts = _compositions(m, n) / n
    centre = np.full((1, m), 1.0 / m)
    return np.vstack([pts, centre])


@lru_cache(maxsize=64)
def _grid_values(h: HypothesisPair, n_grid: int):
    g = _geometry(h)
    pts = _simplex_grid(g.m, n_grid)
    return pts, g.values(pts)


# ---------------------------------------------------------------------------
# Conditions


def _condition_parts(cid: str, quantifier: str) -> list[tuple[int | None, tuple[str, ...], tuple[str, ...]]]:
    """(theta label, alpha-side names, beta-side names) alternatives for a condition."""
    if cid == "I":
        return [(None, ("D0", "D1"), ())]
    if cid == "II":
        return [(None, ("DX0", "DX1"), ("CX0", "CX1"))]
    if cid == "III":
        return [(None, ("DY0", "DY1"), ("CY0", "CY1"))]
    if cid in ("IV", "V"):
        side = "X" if cid == "IV" else "Y"

        def part(t):
            o = 1 - t
            return (f"D{t}", f"D{side}{o}"), (f"C{side}{o}",)

        if quantifier == "exists":
            return [(t, *part(t)) for t in (0, 1)]
        if quantifier == "forall":
            a0, b0 = part(0)
            a1, b1 = part(1)
            return [(None, a0 + a1, b0 + b1)]
        raise ValueError(f"unknown quantifier {quantifier!r}")
    raise ValueError(f"unknown condition {cid!r}")


def _solve(g: _Geometry, start: np.ndarray, alpha_names, beta_names, alpha_cap: float | None):
    """SLSQP on min t s.t. beta-side <= t and alpha-side <= alpha_cap.

    With ``alpha_cap=None`` the alpha side is moved into the objective
    (phase A: minimize the largest alpha-side divergence).
    """
    obj_names = tuple(alpha_names) if alpha_cap is None else tuple(beta_names)
    cap_names = () if alpha_cap is None else tuple(alpha_names)
    names = obj_names + cap_names
    k_obj = len(obj_names)
    m = g.m
    # constraint i reads  shift_i + t_coef_i * t - f_i(q) >= 0
    t_coef = np.array([1.0] * k_obj + [0.0] * len(cap_names))
    shift = np.array([0.0] * k_obj + [alpha_cap or 0.0] * len(cap_names))

    def fun(z):
        return shift + t_coef * z[m] - g.point(names, z[:m])

    def jac(z):
        return np.column_stack([-g.point_jacobian(names, z[:m]), t_coef])

    cons = [{"type": "eq", "fun": lambda z: np.array([np.sum(z[:m]) - 1.0]),
             "jac": lambda z: np.concatenate([np.ones(m), [0.0]])[None, :]},
            {"type": "ineq", "fun": fun, "jac": jac}]
    t0 = float(np.max(g.point(obj_names, start)))
    z0 = np.concatenate([start, [t0]])
    grad_t = np.concatenate([np.zeros(m), [1.0]])
    res = minimize(lambda z: z[m], z0, jac=lambda z: grad_t,
                   method="SLSQP", constraints=cons,
                   bounds=[(0.0, 1.0)] * m + [(None, None)],
                   options={"maxiter": 200, "ftol": 1e-13})
    q = np.clip(res.x[:m], 0.0, None)
    return q / q.sum()


def _score(g: _Geometry, q: np.ndarray, alpha_names, beta_names, alpha: float | None):
    """(objective, alpha-side excess) for a single q."""
    a_side = float(np.max(g.point(alpha_names, q)))
    if alpha is None:
        return a_side, 0.0
    obj = float(np.max(g.point(beta_names, q))) if beta_names else 0.0
    return obj, a_side - alpha


def _optimize(h: HypothesisPair, alpha_names, beta_names, alpha: float | None, n_grid: int, starts: int = 3):
    g = _geometry(h)
    pts, vals = _grid_values(h, n_grid)
    a_side = np.max(np.column_stack([vals[n] for n in alpha_names]), axis=1)
    if alpha is None:
        score = a_side
        ok = np.ones(len(pts), dtype=bool)
    else:
        b_side = (np.max(np.column_stack([vals[n] for n in beta_names]), axis=1)
                  if beta_names else np.zeros(len(pts)))
        ok = a_side <= alpha
        score = np.where(ok, b_side, np.inf)
    candidates = [pts[i] for i in np.argsort(score, kind="stable")[:starts] if np.isfinite(score[i])]
    if alpha is not None and not candidates:
        q_a, _ = _phase_a(h, tuple(alpha_names), n_grid)
        candidates = [q_a]
    best_q, best_obj = None, math.inf
    for start in candidates:
        for q in (start, _solve(g, start, alpha_names, beta_names, alpha)):
            obj, excess = _score(g, q, alpha_names, beta_names, alpha)
            if excess > 1e-10:
                continue
            if obj < best_obj - 1e-15:
                best_q, best_obj = q, obj
    return best_q, best_obj


@lru_cache(maxsize=4096)
def _phase_a(h: HypothesisPair, alpha_names: tuple[str, ...], n_grid: int):
    return _optimize(h, alpha_names, (), None, n_grid)


@lru_cache(maxsize=65536)
def _phase_b(h: HypothesisPair, alpha_names: tuple[str, ...], beta_names: tuple[str, ...], alpha: float, n_grid: int):
    if not beta_names:
        return _phase_a(h, alpha_names, n_grid)[0], 0.0
    return _optimize(h, alpha_names, beta_names, alpha, n_grid)


def beta_threshold(cid: str, h: HypothesisPair, alpha: float, *, quantifier: str = "exists",
                   n_grid: int = DEFAULT_GRID, tol: float = FEAS_TOL):
    """Smallest beta at which condition ``cid`` becomes feasible for this alpha.

    Returns ``(beta_c, theta, q)``; ``beta_c`` is ``inf`` when the alpha side
    alone is already infeasible, and ``q`` is then the alpha-side minimizer.
    """
    g = _geometry(h)
    if g.m == 0:
        return math.inf, None, None
    best = (math.inf, None, None)
    fallback = None
    for theta, a_names, b_names in _condition_parts(cid, quantifier):
        q_a, a_min = _phase_a(h, a_names, n_grid)
        if a_min > alpha + tol:
            if fallback is None or a_min - alpha < fallback[0]:
                fallback = (a_min - alpha, theta, q_a)
            continue
        q, b = _phase_b(h, a_names, b_names, float(alpha), n_grid)
        if q is None:
            # the alpha side is only feasible within tolerance; use its minimizer
            q = q_a
            b = _score(g, q_a, a_names, b_names, math.inf)[0]
        if b < best[0]:
            best = (b, theta, q)
    if best[2] is None and fallback is not None:
        return math.inf, fallback[1], fallback[2]
    return best


# ---------------------------------------------------------------------------
# Exact re-checking


def _rationalize(h: HypothesisPair, q: np.ndarray) -> JointPMF:
    g = _geometry(h)
    nx, ny = g.shape
    d = WITNESS_DENOMINATOR
    nums = [int(round(v * d)) for v in q]
    big = max(range(len(nums)), key=lambda i: nums[i])
    nums[big] += d - sum(nums)
    mass = [[Fraction(0)] * ny for _ in range(nx)]
    for (x, y), k in zip(g.cells, nums):
        mass[x][y] = Fraction(k, d)
    return JointPMF(mass)


def _exact_values(q: JointPMF, h: HypothesisPair) -> dict[str, float]:
    out = {}
    qx, qy = marginal_x(q), marginal_y(q)
    qyx, qxy = conditional_y_given_x(q), conditional_x_given_y(q)
    for t in (0, 1):
        p = h[t]
        out[f"D{t}"] = float(kl(q, p))
        out[f"DX{t}"] = float(kl(qx, marginal_x(p)))
        out[f"DY{t}"] = float(kl(qy, marginal_y(p)))
        out[f"CX{t}"] = float(cond_kl(qyx, conditional_y_given_x(p), qx))
        out[f"CY{t}"] = float(cond_kl(qxy, conditional_x_given_y(p), qy))
    return out


def _witness_from(cid, theta, q, h, alpha, beta, quantifier) -> FeasibilityWitness:
    exact_h = h if h.exact else None
    qr = _rationalize(h, q)
    values = _exact_values(qr, exact_h or h)
    slack = {}
    for th, a_names, b_names in _condition_parts(cid, quantifier):
        if th != theta:
            continue
        for n in a_names:
            slack[n] = alpha - values[n]
        for n in b_names:
            slack[n] = beta - values[n]
    return FeasibilityWitness(cid, theta, qr, slack)


def check_witness(w: FeasibilityWitness, h: HypothesisPair, alpha: float, beta: float,
                  *, quantifier: str = "exists", tol: float = FEAS_TOL) -> bool:
    """Independent re-check of every inequality of the witness's condition."""
    values = _exact_values(w.q, h)
    for th, a_names, b_names in _condition_parts(w.condition_id, quantifier):
        if th != w.theta:
            continue
        if any(values[n] > alpha + tol for n in a_names):
            return False
        if any(values[n] > beta + tol for n in b_names):
            return False
        if w.condition_id in ("IV", "V") and th is not None:
            # the joint constraint bounds the matching marginal by the chain rule
            side = "X" if w.condition_id == "IV" else "Y"
            if values[f"D{side}{th}"] > values[f"D{th}"] + tol:
                return False
        return True
    return False


# ---------------------------------------------------------------------------
# Public operations


def condition_feasible(cid: str, h: HypothesisPair, alpha: float, beta: float, *,
                       quantifier: str = "exists", n_grid: int = DEFAULT_GRID,
                       tol: float = FEAS_TOL) -> FeasibilityResult:
    ExponentPair(alpha, beta)
    b_c, theta, q = beta_threshold(cid, h, alpha, quantifier=quantifier, n_grid=n_grid, tol=tol)
    if q is None:
        return FeasibilityResult(False, cid, None, math.inf)
    w = _witness_from(cid, theta, q, h, alpha, beta, quantifier)
    violation = max(-s for s in w.slack.values())
    feasible = b_c <= beta + tol and check_witness(w, h, alpha, beta, quantifier=quantifier, tol=tol)
    return FeasibilityResult(feasible, cid, w, violation)


def is_achievable(h: HypothesisPair, alpha: float, beta: float, *, quantifier: str = "exists",
                  n_grid: int = DEFAULT_GRID, tol: float = FEAS_TOL) -> Verdict:
    for cid in CONDITIONS:
        r = condition_feasible(cid, h, alpha, beta, quantifier=quantifier, n_grid=n_grid, tol=tol)
        if r.feasible:
            return Verdict(alpha, beta, False, r.witness)
    return Verdict(alpha, beta, True, None)


def chernoff_cap(h: HypothesisPair, *, n_grid: int = DEFAULT_GRID) -> float:
    """min over Q of max(D(Q||P0), D(Q||P1)); ``inf`` for disjoint supports."""
    if _geometry(h).m == 0:
        return math.inf
    return _phase_a(h, ("D0", "D1"), n_grid)[1]


def trace_boundary(h: HypothesisPair, alpha_grid: Sequence[float], *, beta_tol: float = BISECT_TOL,
                   quantifier: str = "exists", n_grid: int = DEFAULT_GRID, tol: float = FEAS_TOL,
                   progress: Callable[[int], None] | None = None) -> RegionBoundary:
    """Bisect on beta for each alpha to find beta*(alpha), the infimum of non-achievable beta."""
    cap = chernoff_cap(h, n_grid=n_grid)
    points = []
    for i, alpha in enumerate(alpha_grid):
        alpha = float(alpha)

        def verdict(beta):
            return is_achievable(h, alpha, beta, quantifier=quantifier, n_grid=n_grid, tol=tol)

        top = verdict(BETA_PROBE)
        if top.achievable:
            points.append(BoundaryPoint(alpha, math.inf, "unbounded", None, None))
        else:
            bottom = verdict(0.0)
            if not bottom.achievable:
                status = "undefined" if bottom.witness.condition_id == "I" else "bounded"
                beta_star = None if status == "undefined" else 0.0
                points.append(BoundaryPoint(alpha, beta_star, status, bottom.witness.condition_id, bottom.witness))
            else:
                lo, hi, hi_v = 0.0, BETA_PROBE, top
                while hi - lo > beta_tol:
                    mid = 0.5 * (lo + hi)
                    v = verdict(mid)
                    if v.achievable:
                        lo = mid
                    else:
                        hi, hi_v = mid, v
                points.append(BoundaryPoint(alpha, hi, "bounded", hi_v.witness.condition_id, hi_v.witness))
        if progress is not None:
            progress(i)
    return RegionBoundary(tuple(points), cap, beta_tol, n_grid, quantifier)


def parse_grid(text: str) -> list[float]:
    """``"start:stop:step"`` (stop inclusive up to rounding) or a comma list."""
    if ":" in text:
        parts = [float(v) for v in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ValueError(f"grid must be start:stop:step with step > 0, got {text!r}")
        start, stop, step = parts
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(max(count, 0))]
    return [float(v) for v in text.split(",") if v.strip()]

"""Command-line entry point: ``privht <command> ...``.

Exit status: 0 success, 2 invalid input, 3 infeasible or undefined result,
4 enumeration budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .achievability import (
    WellDefinednessError,
    build_tables,
    claim_mu_bound,
    exact_privacy_profile,
    exact_type_error,
    exponent_fit,
    sanov_bound,
)
from .converse import InducedDecision, induce_decision, lemma1_privacy_stat, s_fraction
from .dist import EmpiricalType, HypothesisPair
from .io import HypothesesFormatError, hypotheses_to_dict, load_hypotheses
from .presets import PRESETS, preset
from .protocol.and_reduction import build_and_reduction, measure_and_security
from .protocol.audit import audit
from .protocol.engine import DEFAULT_BUDGET, BudgetExceeded, ProtocolError, sequence_prior
from .protocol.tables import load_protocol
from .region import BISECT_TOL, DEFAULT_GRID, parse_grid, trace_boundary

EXIT_OK, EXIT_INVALID, EXIT_UNDEFINED, EXIT_BUDGET = 0, 2, 3, 4


class UndefinedResult(RuntimeError):
    """The requested quantity does not exist for these inputs."""


# ---------------------------------------------------------------------------
# shared plumbing


def _hypotheses(args) -> HypothesisPair:
    if getattr(args, "hypotheses", None):
        return load_hypotheses(args.hypotheses)
    return preset(args.preset)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _config(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit(args, text: str, started: float) -> None:
    """Write the artifact and its manifest, or print to stdout when no --out is given."""
    if not args.out:
        sys.stdout.write(text)
        return
    out = Path(args.out)
    out.write_text(text)
    inputs = {}
    for key in ("hypotheses", "protocol"):
        path = getattr(args, key, None)
        if path:
            inputs[key] = {"path": str(path), "sha256": _sha256(Path(path).read_bytes())}
    manifest = {
        "command": args.command,
        "config": _config(args),
        "seed": args.seed,
        "inputs": inputs,
        "output": {"path": str(out), "sha256": _sha256(text.encode())},
        "versions": {"privht": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "wall_time_s": round(time.perf_counter() - started, 3),
    }
    Path(str(out) + ".manifest.json").write_text(_dump_json(manifest))


def _float(v: float) -> str:
    if v is None:
        return "undefined"
    if math.isinf(v):
        return "inf"
    return repr(float(v))


# ---------------------------------------------------------------------------
# region


def _trace_chunk(payload):
    h, grid, beta_tol, quantifier, n_grid = payload
    return trace_boundary(h, grid, beta_tol=beta_tol, quantifier=quantifier, n_grid=n_grid)


def cmd_region(args) -> int:
    started = time.perf_counter()
    h = _hypotheses(args).to_float() if args.float else _hypotheses(args)
    grid = parse_grid(args.alpha)
    if not grid or any(a < 0 for a in grid):
        raise ValueError("--alpha must describe a non-empty grid of non-negative values")
    jobs = max(1, args.jobs)
    if jobs == 1 or len(grid) < 2:
        boundary = trace_boundary(h, grid, beta_tol=args.beta_tol, quantifier=args.quantifier, n_grid=args.grid)
        points, cap = boundary.points, boundary.cap
    else:
        size = math.ceil(len(grid) / jobs)
        parts = [grid[i:i + size] for i in range(0, len(grid), size)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_trace_chunk, [(h, g, args.beta_tol, args.quantifier, args.grid) for g in parts]))
        points = tuple(p for r in results for p in r.points)
        cap = results[0].cap
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", "beta_star", "binding_condition", "witness_q", "seed"])
    for p in points:
        beta = "inf" if p.status == "unbounded" else ("undefined" if p.status == "undefined" else _float(p.beta_star))
        w.writerow([_float(p.alpha), beta, p.binding_condition or "none",
                    p.witness.flat_q() if p.witness is not None else "none", args.seed])
    _emit(args, buf.getvalue(), started)
    print(f"alpha cap {cap:.6f} bits; {len(points)} points", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate


def _evaluate_n(payload):
    h, alpha, beta, n = payload
    ta, tb = build_tables(h, alpha, beta, n)
    cells = h.shape[0] * h.shape[1]
    per_theta = {}
    deltas, mus = [], []
    for theta in (0, 1):
        rec = {}
        for side, t in (("A", ta), ("B", tb)):
            d = exact_type_error(t, h, theta)
            prof = exact_privacy_profile(t, h, theta)
            rec[side] = {"delta": str(d), "mu": str(prof.mu)}
            deltas.append(d)
            mus.append(prof.mu)
        per_theta[str(theta)] = rec
    return {
        "n": n,
        "delta_exact": str(max(deltas)),
        "mu_exact": str(max(mus)),
        "sanov_bound": sanov_bound(alpha, n, cells),
        "claim5_mu_bound": claim_mu_bound(beta, n, cells),
        "per_theta": per_theta,
    }


def _parse_n_range(text: str) -> list[int]:
    """``lo:hi`` or ``lo:hi:step`` (inclusive) or a comma list."""
    try:
        if ":" in text:
            parts = [int(v) for v in text.split(":")]
            if len(parts) == 2:
                parts.append(1)
            lo, hi, step = parts
            if step < 1:
                raise ValueError
            return list(range(lo, hi + 1, step))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"--n-range must be lo:hi[:step] or a comma list of integers, got {text!r}") from None


def cmd_evaluate(args) -> int:
    started = time.perf_counter()
    h = _hypotheses(args)
    ns = _parse_n_range(args.n_range)
    if not ns or min(ns) < 1:
        raise ValueError("--n-range must list sample sizes >= 1")
    payloads = [(h, args.alpha, args.beta, n) for n in ns]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            records = list(pool.map(_evaluate_n, payloads))
    else:
        records = [_evaluate_n(p) for p in payloads]
    fits = {}
    if len(records) >= 3:
        for key in ("delta_exact", "mu_exact"):
            fit = exponent_fit([(r["n"], Fraction(r[key])) for r in records])
            fits[key] = {"slope": None if fit.exact_zero else fit.slope, "exact_zero": fit.exact_zero}
    doc = {"alpha": args.alpha, "beta": args.beta, "seed": args.seed,
           "hypotheses": hypotheses_to_dict(h), "records": records, "exponent_fits": fits}
    _emit(args, _dump_json(doc), started)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate / audit


def _protocol(args, h):
    return load_protocol(args.protocol, h, args.n)


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    h = _hypotheses(args)
    p = _protocol(args, h)
    doc = {"protocol": p.name, "n": args.n, "mode": args.mode, "seed": args.seed}
    if args.mode == "exact":
        da, db = induce_decision(p, h, args.n, budget=args.budget)
        doc["decision_probabilities"] = {
            "A": [[str(v) for v in row] for row in da.table],
            "B": [[str(v) for v in row] for row in db.table],
        }
        errs = {}
        for theta in (0, 1):
            g, G = sequence_prior(h, args.n, theta)
            for side, d in (("A", da), ("B", db)):
                wrong = sum(Fraction(g[x][y], G) * (d.table[x][y] if theta == 0 else 1 - d.table[x][y])
                            for x in range(len(g)) for y in range(len(g[0])))
                errs[f"{side}|theta={theta}"] = str(wrong)
        doc["error"] = errs
    else:
        rng = np.random.default_rng(args.seed)
        nx, ny = h.shape
        errs = {}
        for theta in (0, 1):
            probs = np.array([float(v) for v in h[theta].flat()])
            cells = rng.choice(len(probs), size=(args.samples, args.n), p=probs / probs.sum())
            xs, ys = cells // ny, cells % ny
            xi = np.zeros(args.samples, dtype=np.int64)
            yi = np.zeros(args.samples, dtype=np.int64)
            for i in range(args.n):
                xi = xi * nx + xs[:, i]
                yi = yi * ny + ys[:, i]
            ridx = rng.integers(0, p.randomness_size, size=args.samples)
            ra, rb = p.decode_randomness(ridx)
            _, da, db = p.run(xi, yi, ra, rb)
            errs[f"A|theta={theta}"] = float(np.mean(da != theta))
            errs[f"B|theta={theta}"] = float(np.mean(db != theta))
        doc["samples"] = args.samples
        doc["error_frequency"] = errs
        doc["note"] = "sampled estimates; not a certificate"
    _emit(args, _dump_json(doc), started)
    return EXIT_OK


def cmd_audit(args) -> int:
    started = time.perf_counter()
    h = _hypotheses(args)
    p = _protocol(args, h)
    rep = audit(p, h, args.n, budget=args.budget, keep_curves=args.curves)
    doc = rep.to_dict()
    doc.update({"definition": args.definition, "mu": str(rep.mu(args.definition)), "seed": args.seed})
    _emit(args, _dump_json(doc), started)
    return EXIT_OK


# ---------------------------------------------------------------------------
# reduce-and / converse


def cmd_reduce_and(args) -> int:
    started = time.perf_counter()
    h = _hypotheses(args)
    if h.shape != (2, 2):
        raise ValueError("the AND reduction needs binary alphabets")
    inner = _protocol(args, h)
    outer = build_and_reduction(inner, args.n)
    sec = measure_and_security(outer, budget=args.budget)
    rep = audit(inner, h, args.n, budget=args.budget)
    delta, mu = rep.delta_max, rep.mu("weak")
    tau = max(delta, 2 * mu)
    doc = {
        "protocol": inner.name,
        "n": args.n,
        "seed": args.seed,
        "measured": sec.to_dict(),
        "inner_audit": {"delta": str(delta), "mu_weak": str(mu), "mu_strict": str(rep.mu("strict"))},
        "tau": str(tau),
        "within_tau": sec.err_max <= tau and sec.tv_a <= tau and sec.tv_b <= tau,
    }
    _emit(args, _dump_json(doc), started)
    return EXIT_OK


def cmd_converse(args) -> int:
    started = time.perf_counter()
    h = _hypotheses(args)
    q = EmpiricalType.parse(args.q)
    if q.shape != h.shape:
        raise ValueError(f"type shape {q.shape} does not match the hypotheses {h.shape}")
    n = q.n
    if args.protocol:
        p = load_protocol(args.protocol, h, n)
        dec = dict(zip("AB", induce_decision(p, h, n, budget=args.budget)))[args.side]
    else:
        ta, tb = build_tables(h, args.alpha, args.beta, n)
        dec = InducedDecision.from_table(ta if args.side == "A" else tb)
    threshold = Fraction(args.threshold)
    rep = s_fraction(q, dec, args.theta, threshold, h=h)
    own = q.x_counts() if args.side == "A" else q.y_counts()
    stats = []
    for seq, _, _ in rep.averages:
        try:
            stats.append({"sequence": "".join(map(str, seq)),
                          "posterior_shift": str(lemma1_privacy_stat(dec, h, args.theta, seq))})
        except ValueError:
            stats.append({"sequence": "".join(map(str, seq)), "posterior_shift": None})
    doc = {"side": args.side, "n": n, "seed": args.seed, "own_counts": list(own),
           "decision_source": dec.provenance, "s_fraction": rep.to_dict(), "posterior_shifts": stats}
    _emit(args, _dump_json(doc), started)
    if rep.fraction is None:
        raise UndefinedResult(rep.note)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="privht", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"privht {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, protocol=False, n=False):
        src = p.add_mutually_exclusive_group()
        src.add_argument("--hypotheses", help="hypothesis-pair JSON file")
        src.add_argument("--preset", choices=sorted(PRESETS), default="three-point",
                         help="built-in hypothesis pair (default: three-point)")
        p.add_argument("--seed", type=int, default=0, help="recorded in every artifact; drives sampling")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--out", help="output file; a <out>.manifest.json is written next to it")
        p.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
                       help="max input-pair x randomness states enumerated exactly")
        if protocol:
            p.add_argument("--protocol", required=True, help="protocol JSON file")
        if n:
            p.add_argument("--n", type=int, required=True, help="sample size")

    p = sub.add_parser("region", help="trace the boundary beta*(alpha) of the exponent region")
    common(p)
    p.add_argument("--alpha", default="0:0.58:0.02", help="start:stop:step or comma list")
    p.add_argument("--beta-tol", type=float, default=BISECT_TOL)
    p.add_argument("--quantifier", choices=["exists", "forall"], default="exists")
    p.add_argument("--grid", type=int, default=DEFAULT_GRID, help="simplex grid resolution for the search")
    p.add_argument("--float", action="store_true", help="use float PMFs instead of exact rationals")
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("evaluate", help="exact error and privacy of the type-based tables")
    common(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--n-range", default="2:8", help="lo:hi (inclusive) or comma list")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="run a protocol exactly or by sampling")
    common(p, protocol=True, n=True)
    p.add_argument("--mode", choices=["exact", "sampled"], default="exact")
    p.add_argument("--samples", type=int, default=10000)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("audit", help="exact correctness and privacy audit of a protocol")
    common(p, protocol=True, n=True)
    p.add_argument("--definition", choices=["strict", "weak"], default="strict")
    p.add_argument("--curves", action="store_true", help="include every view's weight and TV")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("reduce-and", help="wrap a protocol into an AND protocol and measure it")
    common(p, protocol=True, n=True)
    p.set_defaults(func=cmd_reduce_and, preset="diagonal")

    p = sub.add_parser("converse", help="S-set fraction and decision-level privacy statistic")
    common(p)
    p.add_argument("--protocol", help="protocol JSON; omit to use the type-based tables")
    p.add_argument("--alpha", type=float, default=0.4, help="table parameters when no protocol is given")
    p.add_argument("--beta", type=float, default=0.25)
    p.add_argument("--theta", type=int, choices=[0, 1], default=0)
    p.add_argument("--q", required=True, help='joint type, e.g. "counts=1,1;0,2"')
    p.add_argument("--threshold", default="99/100")
    p.add_argument("--side", choices=["A", "B"], default="A")
    p.set_defaults(func=cmd_converse)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BudgetExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except (WellDefinednessError, UndefinedResult) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_UNDEFINED
    except (HypothesesFormatError, ProtocolError, ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

"""Protocols described in JSON.

Two forms are accepted.  A table-driven protocol lists every rule explicitly::

    {
      "name": "leak-first-bit",
      "parties": ["A", "B"],
      "input_sizes": [4, 4],
      "ot_count": 0,
      "tapes": {"A": 1, "B": 0},
      "schedule": ["A", "B"],
      "next_message": {"0": {"*|*|": 0}, "1": {"*|*|*": 1}},
      "decisions": {"A": {"*": 0}, "B": {"*": 1}}
    }

Rule keys are shell-style wildcard patterns matched against
``"<input>|<randomness>|<transcript>"`` where the input is a decimal index,
the randomness lists one character per column (tape bits first, then one
digit 0-3 per OT half) and the transcript is the bit string so far.  The
first matching rule wins; a reachable state with no matching rule is an
error.  Decision rules see the full transcript.

A construction names a built-in protocol::

    {"construction": "secure-eval", "tables": {"A": [[0, 0], [0, 1]], "B": [[0, 0], [0, 1]]}}
    {"construction": "achievability-secure-eval", "alpha": 0.4, "beta": 0.25}

Constructions tied to a sample size (``achievability-secure-eval``,
``reveal-equality`` without ``size``, ``randomized-response`` without ``n``)
take n and the hypotheses from the caller.
"""

from __future__ import annotations

import json
from fnmatch import fnmatchcase
from fractions import Fraction
from pathlib import Path

import jsonschema
import numpy as np

from ..dist import HypothesisPair
from .engine import ProtocolError, ProtocolSpec

__all__ = ["PROTOCOL_SCHEMA", "ProtocolFormatError", "load_protocol", "protocol_from_dict"]

_RULES = {"type": "object", "additionalProperties": {"type": "integer", "enum": [0, 1]}}
_PROB = {"oneOf": [{"type": "number", "minimum": 0, "maximum": 1},
                   {"type": "string", "pattern": r"^\s*\d+\s*(/\s*\d+\s*)?$"}]}
_MATRIX = {"type": "array", "minItems": 1, "items": {"type": "array", "minItems": 1, "items": _PROB}}

PROTOCOL_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "required": ["input_sizes", "schedule", "next_message", "decisions"],
            "additionalProperties": False,
            "properties": {
                "name": {"type": "string"},
                "parties": {"const": ["A", "B"]},
                "input_sizes": {"type": "array", "items": {"type": "integer", "minimum": 1},
                                "minItems": 2, "maxItems": 2},
                "ot_count": {"type": "integer", "minimum": 0},
                "tapes": {"type": "object", "additionalProperties": False,
                          "properties": {"A": {"type": "integer", "minimum": 0},
                                         "B": {"type": "integer", "minimum": 0}}},
                "schedule": {"type": "array", "items": {"enum": ["A", "B"]}},
                "next_message": {"type": "object", "additionalProperties": _RULES},
                "decisions": {"type": "object", "required": ["A", "B"], "additionalProperties": False,
                              "properties": {"A": _RULES, "B": _RULES}},
            },
        },
        {
            "type": "object",
            "required": ["construction"],
            "properties": {
                "name": {"type": "string"},
                "construction": {"enum": ["secure-eval", "cleartext", "achievability-secure-eval",
                                          "reveal-equality", "randomized-response",
                                          "no-communication", "coin-flip"]},
                "tables": {"type": "object", "required": ["A", "B"],
                           "properties": {"A": _MATRIX, "B": _MATRIX}},
                "alpha": {"type": "number", "minimum": 0},
                "beta": {"type": "number", "minimum": 0},
                "size": {"type": "integer", "minimum": 1},
                "n": {"type": "integer", "minimum": 1},
                "flip": _PROB,
                "input_sizes": {"type": "array", "items": {"type": "integer", "minimum": 1},
                                "minItems": 2, "maxItems": 2},
            },
        },
    ]
}


class ProtocolFormatError(ProtocolError):
    """Malformed protocol file; the message names the line or field at fault."""


def _field_path(err: jsonschema.ValidationError) -> str:
    path = "$"
    for part in err.absolute_path:
        path += f"[{part}]" if isinstance(part, int) else f".{part}"
    return path


def _schema_error(doc: dict) -> str | None:
    validator = jsonschema.Draft202012Validator(PROTOCOL_SCHEMA)
    errors = list(validator.iter_errors(doc))
    if not errors:
        return None
    err = jsonschema.exceptions.best_match(errors)
    # oneOf hides the useful part; dig into the branch that matches the document's form
    branch = 1 if isinstance(doc, dict) and "construction" in doc else 0
    for sub in err.context or ():
        if sub.relative_schema_path and sub.relative_schema_path[0] == branch:
            err = sub
            break
    return f"{_field_path(err)}: {err.message}"


def _rule_table(rules: dict, where: str):
    items = list(rules.items())

    def lookup(key: str) -> int:
        for pat, bit in items:
            if fnmatchcase(key, pat):
                return bit
        raise ProtocolError(f"{where}: no rule matches reachable state {key!r}")

    return lookup


def _rand_strings(rand: np.ndarray) -> list[str]:
    return ["".join(str(int(v)) for v in row) for row in rand]


def _prefix_strings(prefix: np.ndarray) -> list[str]:
    return ["".join("1" if b else "0" for b in row) for row in prefix]


def _vectorize(lookup):
    """Evaluate a string-keyed rule table on a batch, resolving each distinct key once."""
    memo: dict[str, int] = {}

    def run(inp: np.ndarray, rand: np.ndarray, prefix: np.ndarray, with_prefix: bool = True) -> np.ndarray:
        packed = np.column_stack([inp.reshape(-1, 1), rand, prefix]).astype(np.int64)
        uniq, inv = np.unique(packed, axis=0, return_inverse=True)
        nr = rand.shape[1]
        out = np.empty(len(uniq), dtype=np.int8)
        for i, row in enumerate(uniq):
            key = f"{row[0]}|{''.join(str(v) for v in row[1:1 + nr])}"
            if with_prefix:
                key += "|" + "".join(str(v) for v in row[1 + nr:])
            if key not in memo:
                memo[key] = lookup(key)
            out[i] = memo[key]
        return out[inv.reshape(-1)]

    return run


def _table_driven(doc: dict) -> ProtocolSpec:
    schedule = tuple(doc["schedule"])
    tapes = doc.get("tapes", {})
    msgs = doc["next_message"]
    for step, sender in enumerate(schedule):
        if str(step) not in msgs:
            raise ProtocolFormatError(f"$.next_message: missing rules for step {step} (sent by {sender})")
    extra = sorted(set(msgs) - {str(i) for i in range(len(schedule))})
    if extra:
        raise ProtocolFormatError(f"$.next_message.{extra[0]}: no such step in a {len(schedule)}-step schedule")
    step_fns = {s: _vectorize(_rule_table(msgs[str(s)], f"$.next_message.{s}")) for s in range(len(schedule))}
    dec_fns = {p: _vectorize(_rule_table(doc["decisions"][p], f"$.decisions.{p}")) for p in "AB"}

    def message(s, inp, rand, prefix):
        return step_fns[s](inp, rand, prefix)

    def decision(p):
        return lambda inp, rand, tr: dec_fns[p](inp, rand, tr)

    return ProtocolSpec(
        name=doc.get("name", "table-protocol"),
        input_sizes=tuple(doc["input_sizes"]),
        schedule=schedule,
        message={"A": message, "B": message},
        decision={p: decision(p) for p in "AB"},
        tapes={p: (2,) * int(tapes.get(p, 0)) for p in "AB"},
        ot_count=int(doc.get("ot_count", 0)),
        meta={"source": "table"},
    )


def _construction(doc: dict, h: HypothesisPair | None, n: int | None) -> ProtocolSpec:
    from . import secure_eval, toys

    kind = doc["construction"]

    def need(field):
        if field not in doc:
            raise ProtocolFormatError(f"$.{field}: required by construction {kind!r}")
        return doc[field]

    def sample_size():
        if "n" in doc:
            return doc["n"]
        if n is None:
            raise ProtocolFormatError(f"$.n: construction {kind!r} needs a sample size")
        return n

    if kind in ("secure-eval", "cleartext"):
        t = need("tables")
        conv = lambda m: [[Fraction(str(v)) for v in row] for row in m]
        maker = secure_eval.secure_table_eval if kind == "secure-eval" else toys.cleartext_table
        try:
            return maker(conv(t["A"]), conv(t["B"]))
        except ValueError as e:
            raise ProtocolFormatError(f"$.tables: {e}") from None
    if kind == "achievability-secure-eval":
        from ..achievability import build_tables

        if h is None:
            raise ProtocolFormatError("construction 'achievability-secure-eval' needs hypotheses")
        ta, tb = build_tables(h, float(need("alpha")), float(need("beta")), sample_size())
        return secure_eval.secure_table_eval(ta, tb, name=f"secure-eval-achievability-n{sample_size()}")
    if kind == "reveal-equality":
        size = doc.get("size")
        if size is None:
            if h is None:
                raise ProtocolFormatError("$.size: needed when no hypotheses are given")
            size = h.shape[0] ** sample_size()
        return toys.reveal_equality(size)
    if kind == "randomized-response":
        return toys.randomized_response(sample_size(), Fraction(str(doc.get("flip", "1/4"))))
    sizes = doc.get("input_sizes")
    if sizes is None:
        if h is None:
            raise ProtocolFormatError("$.input_sizes: needed when no hypotheses are given")
        k = sample_size()
        sizes = (h.shape[0] ** k, h.shape[1] ** k)
    if kind == "no-communication":
        return toys.no_communication(tuple(sizes))
    return toys.coin_flip(tuple(sizes))


def protocol_from_dict(doc, h: HypothesisPair | None = None, n: int | None = None) -> ProtocolSpec:
    problem = _schema_error(doc)
    if problem:
        raise ProtocolFormatError(problem)
    if "construction" in doc:
        return _construction(doc, h, n)
    return _table_driven(doc)


def load_protocol(path: str | Path, h: HypothesisPair | None = None, n: int | None = None) -> ProtocolSpec:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProtocolFormatError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from None
    try:
        return protocol_from_dict(doc, h, n)
    except ProtocolFormatError as e:
        raise ProtocolFormatError(f"{path}: {e}") from None

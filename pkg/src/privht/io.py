"""Reading and writing hypothesis-pair files.

    {"alphabet_x": ["0", "1"], "alphabet_y": ["0", "1"],
     "p0": [["1/3", "1/3"], ["0", "1/3"]],
     "p1": [["2/3", "0"], ["0", "1/3"]]}

Entries are rational strings ("a/b"), decimal strings or plain JSON numbers
(read through their decimal text, so 0.1 means exactly 1/10).  Row index is
x, column index is y.
"""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema

from .dist import Alphabet, HypothesisPair, JointPMF, parse_probability

__all__ = ["HYPOTHESES_SCHEMA", "HypothesesFormatError", "hypotheses_from_dict", "hypotheses_to_dict",
           "load_hypotheses"]

_ENTRY = {"oneOf": [{"type": "string"}, {"type": "number", "minimum": 0}]}
_MATRIX = {"type": "array", "minItems": 1,
           "items": {"type": "array", "minItems": 1, "items": _ENTRY}}
_SYMBOLS = {"type": "array", "minItems": 1, "items": {"type": ["string", "integer"]}}

HYPOTHESES_SCHEMA = {
    "type": "object",
    "required": ["p0", "p1"],
    "additionalProperties": False,
    "properties": {
        "alphabet_x": _SYMBOLS,
        "alphabet_y": _SYMBOLS,
        "p0": _MATRIX,
        "p1": _MATRIX,
        "name": {"type": "string"},
    },
}


class HypothesesFormatError(ValueError):
    pass


def _path(err) -> str:
    out = "$"
    for part in err.absolute_path:
        out += f"[{part}]" if isinstance(part, int) else f".{part}"
    return out


def hypotheses_from_dict(doc) -> HypothesisPair:
    errors = list(jsonschema.Draft202012Validator(HYPOTHESES_SCHEMA).iter_errors(doc))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise HypothesesFormatError(f"{_path(err)}: {err.message}")
    pmfs = []
    for key in ("p0", "p1"):
        rows = []
        for i, row in enumerate(doc[key]):
            vals = []
            for j, v in enumerate(row):
                try:
                    vals.append(parse_probability(str(v) if not isinstance(v, str) else v))
                except (ValueError, TypeError) as e:
                    raise HypothesesFormatError(f"$.{key}[{i}][{j}]: {e}") from None
            rows.append(vals)
        try:
            pmfs.append(JointPMF(rows))
        except (ValueError, TypeError) as e:
            raise HypothesesFormatError(f"$.{key}: {e}") from None
    ax = Alphabet(tuple(doc["alphabet_x"])) if "alphabet_x" in doc else None
    ay = Alphabet(tuple(doc["alphabet_y"])) if "alphabet_y" in doc else None
    try:
        return HypothesisPair(pmfs[0], pmfs[1], ax, ay)
    except ValueError as e:
        raise HypothesesFormatError(str(e)) from None


def hypotheses_to_dict(h: HypothesisPair) -> dict:
    mat = lambda p: [[str(p[x, y]) for y in range(p.ny)] for x in range(p.nx)]
    return {"alphabet_x": list(h.alphabet_x.symbols), "alphabet_y": list(h.alphabet_y.symbols),
            "p0": mat(h.p0), "p1": mat(h.p1)}


def load_hypotheses(path: str | Path) -> HypothesisPair:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise HypothesesFormatError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from None
    try:
        return hypotheses_from_dict(doc)
    except HypothesesFormatError as e:
        raise HypothesesFormatError(f"{path}: {e}") from None

"""Named hypothesis pairs used in examples, tests and the command line."""

from __future__ import annotations

from fractions import Fraction

from .dist import HypothesisPair, JointPMF

__all__ = ["PRESETS", "preset", "three_point_pair", "diagonal_pair"]


def three_point_pair() -> HypothesisPair:
    """Null uniform on {(0,0), (0,1), (1,1)}; alternate 2/3 on (0,0) and 1/3 on (1,1)."""
    t = Fraction(1, 3)
    return HypothesisPair(JointPMF([[t, t], [0, t]]), JointPMF([[2 * t, 0], [0, t]]))


def diagonal_pair() -> HypothesisPair:
    """Null uniform on {0,1}^2; alternate uniform on the diagonal {(0,0), (1,1)}."""
    q, h = Fraction(1, 4), Fraction(1, 2)
    return HypothesisPair(JointPMF([[q, q], [q, q]]), JointPMF([[h, 0], [0, h]]))


PRESETS = {"three-point": three_point_pair, "diagonal": diagonal_pair}


def preset(name: str) -> HypothesisPair:
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}") from None

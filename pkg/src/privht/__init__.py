"""Distributed hypothesis testing with privacy: exponent regions, type-based
decision rules, converse statistics and exact audits of two-party protocols."""

from .achievability import (
    DecisionTable,
    WellDefinednessError,
    build_table,
    build_tables,
    exact_privacy_profile,
    exact_type_error,
    exponent_fit,
)
from .dist import EmpiricalType, HypothesisPair, JointPMF, kl, tv
from .presets import preset
from .region import chernoff_cap, is_achievable, trace_boundary

__version__ = "0.1.0"

__all__ = [
    "DecisionTable",
    "EmpiricalType",
    "HypothesisPair",
    "JointPMF",
    "WellDefinednessError",
    "build_table",
    "build_tables",
    "chernoff_cap",
    "exact_privacy_profile",
    "exact_type_error",
    "exponent_fit",
    "is_achievable",
    "kl",
    "preset",
    "trace_boundary",
    "tv",
]

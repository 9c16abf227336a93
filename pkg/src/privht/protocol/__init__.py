"""Finite two-party protocols: execution, secure table evaluation, exact audits."""

from .and_reduction import AndSecurity, build_and_reduction, measure_and_security
from .audit import AuditReport, audit, enumerate_views
from .ot import OTCorrelation, enumerate_ot, sample_ot
from .secure_eval import SecureEvalReport, required_ot, secure_table_eval, verify_theorem6
from .engine import BudgetExceeded, ProtocolError, ProtocolSpec, decode_sequence, encode_sequence, sequence_prior
from .tables import ProtocolFormatError, load_protocol, protocol_from_dict
from .toys import (
    cleartext_table,
    coin_flip,
    no_communication,
    random_protocol,
    randomized_response,
    reveal_equality,
)

__all__ = [
    "AndSecurity",
    "AuditReport",
    "BudgetExceeded",
    "OTCorrelation",
    "ProtocolError",
    "ProtocolFormatError",
    "ProtocolSpec",
    "SecureEvalReport",
    "audit",
    "build_and_reduction",
    "cleartext_table",
    "coin_flip",
    "decode_sequence",
    "encode_sequence",
    "enumerate_ot",
    "enumerate_views",
    "load_protocol",
    "measure_and_security",
    "no_communication",
    "protocol_from_dict",
    "random_protocol",
    "randomized_response",
    "required_ot",
    "reveal_equality",
    "sample_ot",
    "secure_table_eval",
    "sequence_prior",
    "verify_theorem6",
]

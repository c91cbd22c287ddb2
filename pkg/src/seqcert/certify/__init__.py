from .bounds import (
    MIN_ENTROPY,
    SHANNON,
    CertificationError,
    EntropyBound,
    PinnedStatsError,
    TradeoffCoeffs,
    eat_first_order,
    guessing_bound,
    max_confidence_sdp,
    shannon_tradeoff,
)
from .programs import GUESS_TARGETS, SHANNON_TARGETS, guessing_program, max_confidence_program, shannon_program

__all__ = [
    "GUESS_TARGETS",
    "MIN_ENTROPY",
    "SHANNON",
    "SHANNON_TARGETS",
    "CertificationError",
    "EntropyBound",
    "PinnedStatsError",
    "TradeoffCoeffs",
    "eat_first_order",
    "guessing_bound",
    "guessing_program",
    "max_confidence_program",
    "max_confidence_sdp",
    "shannon_program",
    "shannon_tradeoff",
]

"""Certified entropy bounds built on the programs in :mod:`.programs`.

Every reported number comes from a dual point that has been re-checked by
:func:`verify_certificate`; solver output is never trusted directly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..quantum import Ensemble, ObservedStats
from ..sdpengine import DualCertificate, SDPProblem, solve, verify_certificate
from .programs import (
    GUESS_TARGETS,
    SHANNON_TARGETS,
    guessing_program,
    max_confidence_program,
    shannon_program,
)

log = logging.getLogger(__name__)

MIN_ENTROPY = "min-entropy"
SHANNON = "shannon-mintradeoff"
PIN_TOL = 1e-9


class CertificationError(RuntimeError):
    """The solver's dual point could not be turned into a valid certificate."""


class PinnedStatsError(ValueError):
    """Evaluation asked for stats outside the face the program was reduced to."""


@dataclass(frozen=True)
class TradeoffCoeffs:
    """Affine function ``sign * (g_B Q_B + h_B C_B (1 - Q_B) + ... + Tr R) + c_m``.

    ``sign`` is +1 for guessing probabilities and -1 for the Shannon
    min-tradeoff. Parties listed in ``pinned`` were facially reduced, so the
    function is only valid at their recorded statistics.
    """

    g_b: float = 0.0
    h_b: float = 0.0
    g_c: float = 0.0
    h_c: float = 0.0
    trace_r: float = 0.0
    c_m: float = 0.0
    sign: float = -1.0
    pinned: dict = field(default_factory=dict)

    def _check(self, stats: ObservedStats) -> None:
        have = {"B": (stats.conf_b, stats.inc_b), "C": (stats.conf_c, stats.inc_c)}
        for name, pin in self.pinned.items():
            conf, inc = have[name]
            if "inc" in pin and abs(inc - pin["inc"]) > PIN_TOL:
                raise PinnedStatsError(f"party {name}: program assumes Q = {pin['inc']!r}, got {inc!r}")
            if "conf" in pin and not (inc >= 1 and "inc" not in pin) and abs(conf - pin["conf"]) > PIN_TOL:
                raise PinnedStatsError(f"party {name}: program assumes C = {pin['conf']!r}, got {conf!r}")

    def raw(self, stats: ObservedStats) -> float:
        """The affine value at ``stats`` without clamping."""
        self._check(stats)
        total = self.trace_r
        for g, h, conf, inc in ((self.g_b, self.h_b, stats.conf_b, stats.inc_b), (self.g_c, self.h_c, stats.conf_c, stats.inc_c)):
            if g:
                total += g * inc
            if h and inc < 1:
                total += h * conf * (1 - inc)
        return self.c_m + self.sign * total

    def evaluate(self, stats: ObservedStats) -> float:
        """Bits certified at ``stats``: the tradeoff clamped at 0, or ``-log2`` of the guessing bound."""
        v = self.raw(stats)
        if self.sign > 0:
            return _bits(v)
        return max(0.0, v)


@dataclass(frozen=True)
class EntropyBound:
    kind: str
    target: str
    value_bits: float
    guessing_prob: float | None
    tradeoff_coeffs: TradeoffCoeffs | None
    certificate: DualCertificate | None
    primal_value: float = math.nan
    dual_value: float = math.nan
    gap: float = math.nan
    status: str = "optimal"

    @property
    def margin(self) -> float:
        return math.nan if self.certificate is None else self.certificate.slack_margin


def _bits(p: float) -> float:
    return max(0.0, -math.log2(min(1.0, p))) if p > 0 else math.inf


def _coeffs(problem: SDPProblem, cert: DualCertificate, sign: float, c_m: float) -> TradeoffCoeffs:
    mult = cert.multipliers

    def scal(name):
        return float(mult[name]) if name in mult else 0.0

    return TradeoffCoeffs(
        g_b=scal("g_B"),
        h_b=scal("h_B"),
        g_c=scal("g_C"),
        h_c=scal("h_C"),
        trace_r=float(np.real(np.trace(mult["R"]))),
        c_m=c_m,
        sign=sign,
        pinned=dict(problem.labels.get("pinned", {})),
    )


def _solve_and_certify(problem: SDPProblem):
    sol = solve(problem)
    if sol.status == "infeasible":
        return sol, None
    cert = verify_certificate(problem, DualCertificate(sol.dual_multipliers))
    if not cert.valid:
        raise CertificationError(
            f"{problem.labels.get('kind')} {problem.labels.get('target')}: "
            f"certificate rejected ({cert.details.get('reason', 'post-rounding violation')}, status {sol.status})"
        )
    if sol.status != "optimal":
        log.warning("solver ended with %s; certificate still valid (margin %.2e)", sol.status, cert.slack_margin)
    return sol, cert


def guessing_bound(
    target: str,
    ensemble: Ensemble,
    stats: ObservedStats,
    x_star: int = 0,
    *,
    equality_stats: bool = False,
    facial_reduction: bool = True,
) -> EntropyBound:
    """Certified upper bound on the adversary's guessing probability, in bits.

    For ``charlie-trusted`` pass the ensemble Charlie receives. Statistics no
    quantum strategy can produce make the program infeasible; the bound is
    then the trivial ``p_g <= 1`` with status ``infeasible``.
    """
    if target not in GUESS_TARGETS:
        raise ValueError(f"unknown guessing target {target!r}")
    problem = guessing_program(target, ensemble, stats, x_star, equality_stats, facial_reduction)
    sol, cert = _solve_and_certify(problem)
    if cert is None:
        return EntropyBound(MIN_ENTROPY, target, 0.0, 1.0, None, None, status="infeasible")
    p = min(1.0, max(0.0, cert.certified_value))
    bound = EntropyBound(
        kind=MIN_ENTROPY,
        target=target,
        value_bits=_bits(p),
        guessing_prob=p,
        tradeoff_coeffs=_coeffs(problem, cert, 1.0, 0.0),
        certificate=cert,
        primal_value=sol.primal_value,
        dual_value=sol.dual_value,
        gap=abs(cert.certified_value - sol.primal_value),
        status=sol.status,
    )
    return bound


def shannon_tradeoff(
    target: str,
    ensemble: Ensemble,
    stats: ObservedStats,
    m: int,
    x_star: int = 0,
    *,
    equality_stats: bool = False,
    facial_reduction: bool = True,
) -> EntropyBound:
    """Certified affine min-tradeoff function for the conditional Shannon entropy."""
    if target not in SHANNON_TARGETS:
        raise ValueError(f"unknown Shannon target {target!r}")
    problem = shannon_program(target, ensemble, stats, m, x_star, equality_stats, facial_reduction)
    sol, cert = _solve_and_certify(problem)
    if cert is None:
        return EntropyBound(SHANNON, target, 0.0, None, None, None, status="infeasible")
    coeffs = _coeffs(problem, cert, -1.0, float(problem.labels["c_m"]))
    return EntropyBound(
        kind=SHANNON,
        target=target,
        value_bits=max(0.0, cert.certified_value),
        guessing_prob=None,
        tradeoff_coeffs=coeffs,
        certificate=cert,
        primal_value=sol.primal_value,
        dual_value=sol.dual_value,
        gap=abs(sol.primal_value - cert.certified_value),
        status=sol.status,
    )


def eat_first_order(bound: EntropyBound, stats=None) -> float:
    """First-order entropy rate per round.

    With no ``stats`` this is the bound's own value. A single ``ObservedStats``
    evaluates the min-tradeoff there; a sequence returns the minimum over it.
    """
    if bound.kind != SHANNON:
        raise ValueError(f"entropy accumulation needs a {SHANNON} bound, got {bound.kind}")
    if stats is None:
        return bound.value_bits
    if bound.tradeoff_coeffs is None:
        return 0.0
    if isinstance(stats, ObservedStats):
        return bound.tradeoff_coeffs.evaluate(stats)
    values = [bound.tradeoff_coeffs.evaluate(s) for s in stats]
    if not values:
        raise ValueError("empty stats collection")
    return min(values)


def max_confidence_sdp(ensemble: Ensemble, x: int = 0) -> float:
    """Largest confidence for outcome ``x``, as a certified SDP value."""
    problem = max_confidence_program(ensemble, x)
    sol, cert = _solve_and_certify(problem)
    if cert is None:
        raise CertificationError("confidence program reported infeasible")
    return float(cert.certified_value)

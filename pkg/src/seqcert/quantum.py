"""Qubit two-state scenario: preparations, honest sequential measurements, statistics.

Outcome labels are ``0``, ``1`` and ``INC`` (= 2) for the inconclusive result.
Kraus operators follow the usual convention ``M_b = K_b^dag K_b`` with
post-measurement state ``K_b rho K_b^dag``; the joint effects of the chain are
therefore ``G_bc = K_b^dag N_c K_b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .matops import hermitian, min_eigenvalue, perp, projector

INC = 2
OUTCOMES = (0, 1, INC)
TOL = 1e-10


class DegenerateScenario(ValueError):
    """Raised where a construction has no meaning (e.g. fully mixed states)."""


class InfeasibleRate(ValueError):
    """Inconclusive rate outside the range reachable by an MCM."""


@dataclass(frozen=True)
class ScenarioParams:
    delta: float
    r: float
    n: int = 2
    d: int = 2

    def __post_init__(self):
        for name in ("delta", "r"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float, np.floating)) and 0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")
        if self.n != 2 or self.d != 2:
            raise ValueError("only n = 2 preparations on a qubit (d = 2) are supported")

    @property
    def x(self) -> float:
        """The product r*delta, overlap of the complementary pure states."""
        return self.r * self.delta


@dataclass(frozen=True)
class Ensemble:
    states: tuple
    priors: tuple

    def __post_init__(self):
        states = tuple(hermitian(s) for s in self.states)
        priors = tuple(float(p) for p in self.priors)
        if len(states) != len(priors) or not states:
            raise ValueError("need one prior per state")
        if any(p < 0 for p in priors) or abs(sum(priors) - 1) > 1e-12:
            raise ValueError(f"priors must be a probability vector, got {priors}")
        for k, s in enumerate(states):
            if abs(np.trace(s).real - 1) > TOL:
                raise ValueError(f"state {k} has trace {np.trace(s).real!r}")
            if min_eigenvalue(s) < -TOL:
                raise ValueError(f"state {k} is not PSD")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "priors", priors)

    @property
    def dim(self) -> int:
        return self.states[0].shape[0]

    @property
    def average(self) -> np.ndarray:
        return sum(p * s for p, s in zip(self.priors, self.states))


@dataclass(frozen=True)
class PostMeasurementParams:
    t: float
    s: float


@dataclass(frozen=True)
class MCMChain:
    bob_kraus: np.ndarray  # (3, d, d)
    bob_povm: np.ndarray
    charlie_povm: np.ndarray
    q_bob: float

    @property
    def joint(self) -> np.ndarray:
        """G[b, c] = K_b^dag N_c K_b."""
        K = self.bob_kraus
        return np.einsum("bji,cjk,bkl->bcil", K.conj(), self.charlie_povm, K)

    def post_state(self, rho) -> np.ndarray:
        K = self.bob_kraus
        return np.einsum("bij,jk,blk->il", K, rho, K.conj())

    def check(self, atol: float = TOL) -> None:
        eye = np.eye(self.bob_povm.shape[-1])
        for name, povm in (("bob", self.bob_povm), ("charlie", self.charlie_povm)):
            for e in povm:
                if min_eigenvalue(e) < -atol:
                    raise ArithmeticError(f"{name} POVM element not PSD")
            if np.max(np.abs(povm.sum(0) - eye)) > atol:
                raise ArithmeticError(f"{name} POVM incomplete")
        KK = np.einsum("bji,bjk->bik", self.bob_kraus.conj(), self.bob_kraus)
        if np.max(np.abs(KK - self.bob_povm)) > atol:
            raise ArithmeticError("Kraus operators do not reproduce Bob's POVM")
        if np.max(np.abs(self.joint.sum((0, 1)) - eye)) > atol:
            raise ArithmeticError("joint effects incomplete")


@dataclass(frozen=True)
class JointDistribution:
    table: np.ndarray  # p[b, c, x]

    def bob(self, x: int) -> np.ndarray:
        return self.table[:, :, x].sum(1)

    def charlie(self, x: int) -> np.ndarray:
        return self.table[:, :, x].sum(0)


@dataclass(frozen=True)
class ObservedStats:
    conf_b: float
    inc_b: float
    conf_c: float
    inc_c: float

    def __post_init__(self):
        for name in ("conf_b", "inc_b", "conf_c", "inc_c"):
            v = getattr(self, name)
            if not (math.isnan(v) or -1e-12 <= v <= 1 + 1e-12):
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")


def _pure(delta: float, x: int) -> np.ndarray:
    return np.array([math.sqrt((1 + delta) / 2), (-1) ** x * math.sqrt((1 - delta) / 2)])


def build_preparations(params: ScenarioParams) -> Ensemble:
    states = []
    for x in (0, 1):
        psi = _pure(params.delta, x)
        states.append(params.r * projector(psi) + (1 - params.r) * np.eye(2) / 2)
    return Ensemble(tuple(states), (0.5, 0.5))


def max_confidence(params: ScenarioParams) -> float:
    x = params.x
    if 1 - x * x <= 0:
        return 0.5  # identical pure states
    return 0.5 * (1 + params.r * math.sqrt(1 - params.delta**2) / math.sqrt(1 - x * x))


def complementary_decomposition(params: ScenarioParams):
    """Pure kets ``phi_0, phi_1`` with ``rho_x = C phi_x + (1 - C) phi_{1-x}``."""
    if params.r == 0:
        raise DegenerateScenario("r = 0: both preparations are maximally mixed")
    x = params.x
    alpha, beta = math.sqrt((1 + x) / 2), math.sqrt((1 - x) / 2)
    return np.array([alpha, beta]), np.array([alpha, -beta]), max_confidence(params)


def _check_rate(params: ScenarioParams, Q: float) -> None:
    if not (params.x - 1e-12 <= Q <= 1 + 1e-12):
        raise InfeasibleRate(f"inconclusive rate {Q!r} outside [r*delta, 1] = [{params.x}, 1]")


def post_measurement_params(params: ScenarioParams, Q: float) -> PostMeasurementParams:
    _check_rate(params, Q)
    x = params.x
    r, delta = params.r, params.delta
    if 1 - x * x <= 0:
        return PostMeasurementParams(1.0, 1.0)
    if Q == 0:
        # only reachable for x = 0; Bob measures perfectly and leaves no overlap
        t = r * math.sqrt((1 - delta**2) / (1 - x * x)) if delta == 0 else 1.0
        return PostMeasurementParams(min(1.0, t), 0.0)
    t2 = r * r * (1 - delta**2 + (1 - r * r) * delta**2 / Q**2) / (1 - x * x)
    t = math.sqrt(min(1.0, max(0.0, t2)))
    s = x / (Q * t) if t > 0 else 1.0
    return PostMeasurementParams(t, min(1.0, s))


def post_measurement_ensemble(params: ScenarioParams, Q: float) -> Ensemble:
    """The states Charlie receives, in canonical form with overlap ``s`` and purity ``t``."""
    pm = post_measurement_params(params, Q)
    return build_preparations(ScenarioParams(delta=pm.s, r=pm.t))


def build_mcm_chain(params: ScenarioParams, q_bob: float) -> MCMChain:
    _check_rate(params, q_bob)
    q_bob = min(1.0, max(q_bob, params.x))
    x = params.x
    eye = np.eye(2)
    if 1 - x * x <= 1e-15:
        zero = np.zeros((2, 2))
        K = np.array([zero, zero, eye])
        N = np.array([zero, zero, eye])
        return MCMChain(K, np.einsum("bji,bjk->bik", K, K), N, 1.0)

    alpha, beta = math.sqrt((1 + x) / 2), math.sqrt((1 - x) / 2)
    u = np.array([beta, alpha])  # orthogonal to phi_1
    v = np.array([beta, -alpha])  # orthogonal to phi_0
    omega = -x  # <u|v>
    c = (1 - q_bob) / (1 - x * x)
    a = max(0.0, 1 / (1 - omega**2) - c)
    s = x / q_bob if q_bob > 0 else 0.0
    s = min(1.0, s)
    xi0 = np.array([math.sqrt((1 + s) / 2), math.sqrt((1 - s) / 2)])
    xi1 = np.array([math.sqrt((1 + s) / 2), -math.sqrt((1 - s) / 2)])
    K0 = math.sqrt(c) * np.outer(xi0, u)
    K1 = math.sqrt(c) * np.outer(xi1, v)
    Kinc = math.sqrt(a) * (np.outer(xi0, u) + np.outer(xi1, v))
    K = np.array([K0, K1, Kinc])
    M = np.einsum("bji,bjk->bik", K, K)
    M = (M + np.swapaxes(M, 1, 2)) / 2

    dn = 1 / (1 + s)
    N0 = dn * projector(perp(xi1))
    N1 = dn * projector(perp(xi0))
    N = np.array([N0, N1, eye - N0 - N1])
    chain = MCMChain(K, M, N, q_bob)
    chain.check(atol=1e-9)
    return chain


def simulate_joint(chain: MCMChain, ensemble: Ensemble) -> JointDistribution:
    G = chain.joint
    table = np.einsum("bcij,xji->bcx", G, np.array(ensemble.states)).real
    table = np.where(np.abs(table) < 1e-15, 0.0, table)
    return JointDistribution(table)


def _conf_and_inc(marg: np.ndarray, priors, allow_undefined: bool):
    # marg[b, x] = p(b|x)
    pr = np.asarray(priors)
    inc = float(marg[INC] @ pr)
    conclusive = float(sum(marg[k] @ pr for k in (0, 1)))
    correct = float(sum(pr[k] * marg[k, k] for k in (0, 1)))
    if conclusive <= 1e-14:
        if allow_undefined:
            return float("nan"), inc
        raise DegenerateScenario("no conclusive outcomes: confidence undefined")
    return min(1.0, correct / conclusive), min(1.0, max(0.0, inc))


def observed_stats(dist: JointDistribution, priors=(0.5, 0.5), allow_undefined: bool = False) -> ObservedStats:
    pb = dist.table.sum(1)
    pc = dist.table.sum(0)
    cb, qb = _conf_and_inc(pb, priors, allow_undefined)
    cc, qc = _conf_and_inc(pc, priors, allow_undefined)
    return ObservedStats(cb, qb, cc, qc)


def honest_stats(params: ScenarioParams, q_bob: float) -> ObservedStats:
    """Statistics of the optimal chain at Bob's rate ``q_bob`` (closed form)."""
    _check_rate(params, q_bob)
    C = max_confidence(params)
    qc = params.x / q_bob if q_bob > 0 else 0.0
    return ObservedStats(C, q_bob, C, min(1.0, qc))


def shannon_entropy_bits(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())

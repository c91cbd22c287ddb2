"""Builders for the certification SDPs, in multiplier (LMI) form.

Guessing programs: the adversary holds a classical strategy label lambda, one
per guessed outcome (tuple). Each (lambda, outcome) pair gives one block
``-K >= 0`` with

    K = sum_x rho_x [match * [x = x*] - coef(x)] + H_lambda - R,
    coef(x) = g/n [b = inc] + h/n [b = x]   (plus the Charlie terms),

and the bound is ``g Q + h C (1 - Q) + Tr R`` (minimized). ``H_lambda`` is
traceless, which encodes the trace-proportionality of each strategy.

Shannon programs follow the Gauss-Radau relaxation: per interior node i,
guess J and outcome w a 2x2-block LMI ``[[D, F], [F^T, L]] >= 0`` with

    F = tau_i rho* [J ~ w] + Q1_iJ / 2 + A_iJw     (A antisymmetric)
    L = tau_i rho* ((1 - t_i) [J ~ w] + t_i) + Q2_iJ
    sum_iJ D_iJw = R + sum_x rho_x coef_w(x),

and the bound ``c_m - g Q - h C (1 - Q) - ... - Tr R`` is maximized.

The statistics enter as lower bounds, so their multipliers are sign
constrained (``g, h <= 0``).

Facial reduction. When a party's confidence equals the largest confidence the
ensemble allows, every feasible strategy must put each conclusive effect of
that party inside ``ker(C rho_bar - p_x rho_x)`` and hit ``P_inc = Q``
exactly; a party with ``Q = 1`` has no conclusive effects at all. The
conic side then has no interior and the multipliers run off to infinity. With
``facial_reduction=True`` the builders compress every effect onto its forced
subspace and replace the pair of inequalities by the single equality, which
restores a well-posed program with the same optimum. Its certificate is valid
for every statistic with the same pinned confidence.

A second face appears when, on top of that, ``Q`` is the smallest
inconclusive rate compatible with the first face: the inconclusive effect is
then confined too and ``P_inc = Q`` follows from the faces alone, so the
party keeps no multiplier and its ``Q`` is pinned as well.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from ..gaussradau import radau_quadrature
from ..quantum import INC, OUTCOMES, Ensemble, ObservedStats
from ..sdpengine.problem import Affine, ProblemBuilder, SDPProblem, affine_sum

GUESS_TARGETS = ("bob", "charlie-trusted", "charlie", "joint")
SHANNON_TARGETS = ("bob", "charlie", "joint")
FACE_TOL = 1e-10
MIN_INC_TOL = 1e-7  # the minimal rate comes from an SDP solve, not a closed form


def _success_rhs(conf: float, inc: float) -> float:
    """``C (1 - Q)``; an all-inconclusive party constrains nothing."""
    if inc >= 1.0:
        return 0.0
    if math.isnan(conf):
        raise ValueError("confidence undefined while conclusive outcomes occur")
    return conf * (1.0 - inc)


@dataclass
class _Party:
    slot: int  # position in the outcome tuple
    name: str
    q: float
    conf: float
    succ: float
    mode: str = "ineq"  # ineq | eq (P_inc = Q) | none (fully implied by faces) | free
    faces: dict | None = None  # conclusive x -> (d, k) basis of the allowed subspace


def _parties(target: str, stats: ObservedStats):
    if target == "bob":
        parties = [(0, "B", stats.inc_b, stats.conf_b)]
    elif target == "charlie-trusted":
        parties = [(0, "C", stats.inc_c, stats.conf_c)]
    else:
        parties = [(0, "B", stats.inc_b, stats.conf_b), (1, "C", stats.inc_c, stats.conf_c)]
    return [_Party(slot, nm, q, conf, _success_rhs(conf, q)) for slot, nm, q, conf in parties]


def _top_eigvecs(ensemble: Ensemble, x: int):
    """Largest achievable confidence for outcome x and its eigenspace."""
    rho_bar = np.real(ensemble.average)
    a = ensemble.priors[x] * np.real(ensemble.states[x])
    w, v = la.eigh(a, rho_bar)
    top = w[-1]
    vecs = v[:, w >= top - 1e-9]
    q, _ = np.linalg.qr(vecs)
    return float(top), q


def _reduce_party(p: _Party, ensemble: Ensemble) -> None:
    d = ensemble.dim
    n = len(ensemble.states)
    if p.q >= 1.0 - FACE_TOL:
        ker = la.null_space(np.real(ensemble.average), rcond=1e-12)
        p.mode, p.faces = "none", {x: ker for x in range(n)}
        return
    if np.min(np.linalg.eigvalsh(np.real(ensemble.average))) <= 1e-12:
        return
    if any(np.iscomplexobj(s) and np.max(np.abs(np.imag(s))) > 0 for s in ensemble.states):
        return
    tops = [_top_eigvecs(ensemble, x) for x in range(n)]
    cmax = max(t for t, _ in tops)
    if abs(p.conf - cmax) > FACE_TOL:
        return
    faces = {}
    for x, (t, vecs) in enumerate(tops):
        faces[x] = vecs if t >= cmax - FACE_TOL else np.zeros((d, 0))
    p.mode, p.faces = "eq", faces
    qmin, Y = _min_inconclusive(ensemble, faces)
    if abs(p.q - qmin) <= MIN_INC_TOL:
        # P_inc at its minimum: the inconclusive effect is orthogonal to Y and every
        # conclusive effect saturates Y >= rho_bar, which fixes P_inc = Q outright
        scale = max(1.0, float(np.max(np.abs(Y))))
        faces[INC] = la.null_space(Y, rcond=1e-7 * scale)
        for x, V in faces.items():
            if x != INC and V.shape[1]:
                Z = V.T @ (Y - np.real(ensemble.average)) @ V
                faces[x] = V @ la.null_space(Z, rcond=1e-7 * scale) if np.max(np.abs(Z)) > 1e-9 * scale else V
        p.mode = "none"


def _min_inconclusive(ensemble: Ensemble, faces):
    """Smallest P_inc over measurements whose conclusive effects live on ``faces``.

    Solved as ``min Tr Y`` over ``Y >= 0`` with ``V_x^T (Y - rho_bar) V_x >= 0``;
    returns ``(1 - Tr Y*, Y*)``.
    """
    from ..sdpengine.ipm import solve  # local import keeps module load light

    d = ensemble.dim
    rho_bar = np.real(ensemble.average)
    pb = ProblemBuilder("maximize")
    Y = pb.symmetric("Y", d)
    pb.psd("Y", Y)
    for x, V in faces.items():
        if V.shape[1]:
            pb.psd(f"face {x}", _compress(Y - rho_bar, V))
    pb.objective(Y.trace())
    sol = solve(pb.build(), tol=1e-10)
    if sol.status != "optimal":
        raise ArithmeticError(f"minimal inconclusive rate search failed ({sol.status})")
    Ystar = sol.dual_multipliers["Y"]
    return 1.0 - float(np.trace(Ystar)), Ystar


def _intersect(bases, d):
    """Orthonormal basis of the intersection of column spaces."""
    if not bases:
        return None
    if any(b.shape[1] == 0 for b in bases):
        return np.zeros((d, 0))
    stack = np.vstack([np.eye(d) - b @ b.T for b in bases])
    return la.null_space(stack, rcond=1e-9)


def _outcomes(target: str):
    if target in ("bob", "charlie-trusted"):
        return [(b,) for b in OUTCOMES]
    return list(itertools.product(OUTCOMES, OUTCOMES))


def _guesses(target: str):
    if target == "joint":
        return list(itertools.product(OUTCOMES, OUTCOMES))
    return [(j,) for j in OUTCOMES]


def _match(target: str, guess, outcome) -> bool:
    if target in ("bob", "charlie-trusted"):
        return guess[0] == outcome[0]
    if target == "charlie":
        return guess[0] == outcome[1]
    return guess == outcome


def _tag(t) -> str:
    return "".join("e" if v == INC else str(v) for v in t)


def _pin(p: _Party) -> dict:
    """Statistics a reduced program silently assumes for party ``p``."""
    if p.q >= 1.0 - FACE_TOL:
        return {"inc": 1.0}
    if p.mode == "none":
        return {"conf": p.conf, "inc": p.q}
    return {"conf": p.conf}


class _Stats:
    """Multipliers for the statistics constraints and their affine pieces."""

    def __init__(self, pb, target, stats, ensemble, equality: bool, facial_reduction: bool):
        self.parties = _parties(target, stats)
        self.d = ensemble.dim
        self.vars = []
        for p in self.parties:
            if facial_reduction:
                _reduce_party(p, ensemble)
            if equality and p.mode == "ineq":
                p.mode = "free"
            g = h = None
            if p.mode != "none":
                g = pb.scalar(f"g_{p.name}")
                if p.mode in ("ineq", "free"):
                    h = pb.scalar(f"h_{p.name}")
                if p.mode == "ineq":
                    pb.nonneg(f"sign g_{p.name}", -g)
                    pb.nonneg(f"sign h_{p.name}", -h)
            self.vars.append((p, g, h))
        pb.labels["pinned"] = {p.name: _pin(p) for p in self.parties if p.mode in ("eq", "none")}

    def face(self, outcome):
        """Basis of the subspace an effect for ``outcome`` may occupy (None = all)."""
        bases = [p.faces[outcome[p.slot]] for p in self.parties if p.faces and outcome[p.slot] in p.faces]
        return _intersect(bases, self.d)

    def value(self) -> Affine:
        """``sum g Q + h C(1-Q)``."""
        terms = [Affine.constant(0.0)]
        for p, g, h in self.vars:
            if g is not None:
                terms.append(g * p.q)
            if h is not None:
                terms.append(h * p.succ)
        return affine_sum(terms)

    def operator(self, ensemble: Ensemble, outcome) -> Affine:
        """``sum_x rho_x coef_outcome(x)``."""
        n = len(ensemble.states)
        terms = [Affine.constant(np.zeros((self.d, self.d)))]
        for p, g, h in self.vars:
            o = outcome[p.slot]
            for x, rho in enumerate(ensemble.states):
                if o == INC and g is not None:
                    terms.append(g.kron(rho / n))
                elif o == x and h is not None:
                    terms.append(h.kron(rho / n))
        return affine_sum(terms)


def _real_states(ensemble: Ensemble):
    if any(np.iscomplexobj(s) and np.max(np.abs(np.imag(s))) > 0 for s in ensemble.states):
        return None
    return [np.real(s) for s in ensemble.states]


def _compress(expr: Affine, V) -> Affine:
    if V is None or V.shape[1] == V.shape[0]:
        return expr
    return expr.matmul_const(left=V.T, right=V)


def guessing_program(
    target: str,
    ensemble: Ensemble,
    stats: ObservedStats,
    x_star: int = 0,
    equality_stats: bool = False,
    facial_reduction: bool = True,
) -> SDPProblem:
    if target not in GUESS_TARGETS:
        raise ValueError(f"unknown guessing target {target!r}")
    d = ensemble.dim
    real = _real_states(ensemble) is not None
    pb = ProblemBuilder("maximize")
    pb.labels.update(kind="guessing", target=target, x_star=x_star, dim=d)
    st = _Stats(pb, target, stats, ensemble, equality_stats, facial_reduction)
    R = pb.symmetric("R", d) if real else pb.hermitian("R", d)
    rho_star = ensemble.states[x_star]
    if real:
        rho_star = np.real(rho_star)
    faces = {}
    guesses = _guesses(target)
    for lam in guesses:
        # a common traceless shift of every H and of R cancels, so the last H is fixed to 0
        if lam == guesses[-1]:
            H = Affine.constant(np.zeros((d, d)))
        elif real:
            H = pb.traceless(f"H_{_tag(lam)}", d)
        else:
            H = pb.traceless_hermitian(f"H_{_tag(lam)}", d)
        for out in _outcomes(target):
            V = st.face(out)
            faces[_tag(out)] = V
            if V is not None and V.shape[1] == 0:
                continue
            guess = rho_star if _match(target, lam, out) else np.zeros((d, d))
            block = st.operator(ensemble, out) - H + R - guess
            pb.psd(f"lam={_tag(lam)} out={_tag(out)}", _compress(block, V))
    pb.labels["faces"] = faces
    pb.objective(st.value() + R.trace())
    pb.inflate(R, np.eye(d))
    return pb.build()


def shannon_program(
    target: str,
    ensemble: Ensemble,
    stats: ObservedStats,
    m: int,
    x_star: int = 0,
    equality_stats: bool = False,
    facial_reduction: bool = True,
) -> SDPProblem:
    if target not in SHANNON_TARGETS:
        raise ValueError(f"unknown Shannon target {target!r}")
    if not 2 <= m <= 16:
        raise ValueError("m must lie in [2, 16]")
    states = _real_states(ensemble)
    if states is None:
        raise ValueError("Shannon programs are built for real ensembles only")
    d = ensemble.dim
    quad = radau_quadrature(m)
    tau = quad.tau
    pb = ProblemBuilder("minimize")
    pb.labels.update(kind="shannon", target=target, x_star=x_star, dim=d, m=m, c_m=quad.c_m)
    st = _Stats(pb, target, stats, ensemble, equality_stats, facial_reduction)
    R = pb.symmetric("R", d)
    rho = states[x_star]
    zero = np.zeros((d, d))
    outs = _outcomes(target)
    guesses = _guesses(target)
    faces = {o: st.face(o) for o in outs}
    pb.labels["faces"] = {_tag(o): V for o, V in faces.items()}
    dsum = {o: [] for o in outs}
    dvars = []
    for i in quad.interior:
        ti = float(quad.nodes[i])
        for J in guesses:
            Q1 = pb.traceless(f"Q1_{i}_{_tag(J)}", d)
            Q2 = pb.traceless(f"Q2_{i}_{_tag(J)}", d)
            for o in outs:
                V = faces[o]
                k = d if V is None else V.shape[1]
                if k == 0:
                    continue
                hit = _match(target, J, o)
                lab = f"{i}_{_tag(J)}_{_tag(o)}"
                D = pb.symmetric(f"D_{lab}", k)
                F = _compress(Q1 * 0.5 + (tau[i] * rho if hit else zero), V)
                if k > 1:
                    F = F + pb.antisymmetric(f"A_{lab}", k)
                L = _compress(Q2 + tau[i] * rho * ((1 - ti) * hit + ti), V)
                pb.psd(f"node={i} guess={_tag(J)} out={_tag(o)}", Affine.block([[D, F], [F.T, L]]))
                dsum[o].append(D)
                dvars.append((D, k))
    for o in outs:
        if dsum[o]:
            rhs = _compress(R + st.operator(ensemble, o), faces[o])
            pb.equal(affine_sum(dsum[o]) - rhs, 0.0)
    pb.objective(-st.value() - R.trace() + quad.c_m)
    # safe rounding: raise every D by t*I and R by (#D per outcome)*t*I
    per_outcome = len(quad.interior) * len(guesses)
    for D, k in dvars:
        pb.inflate(D, np.eye(k))
    pb.inflate(R, per_outcome * np.eye(d))
    return pb.build()


def max_confidence_program(ensemble: Ensemble, x: int = 0) -> SDPProblem:
    """``max p_x Tr[rho_x M]`` subject to ``Tr[rho_bar M] = 1``, ``M >= 0``."""
    pb = ProblemBuilder("maximize")
    pb.labels.update(kind="confidence", x=x)
    t = pb.scalar("t")
    target = ensemble.priors[x] * ensemble.states[x]
    pb.psd("confidence", t.kron(ensemble.average) - target)
    pb.objective(t)
    pb.inflate(t, 1.0)
    return pb.build()


# honest strategies as conic-side points, for feasibility checks


def _compress_const(X, V):
    if V is None or V.shape[1] == V.shape[0]:
        return X
    return V.T @ X @ V


def honest_guessing_blocks(target: str, problem: SDPProblem, effects) -> dict:
    """Blocks of the single-strategy point: all weight on the first guess.

    ``effects`` maps outcome tags to the honest effects (``M_b`` or ``G_bc``).
    """
    first = _tag(_guesses(target)[0])
    faces = problem.labels["faces"]
    out = {}
    for blk in problem.blocks:
        if blk.label.startswith("lam="):
            lam, o = (part.split("=")[1] for part in blk.label.split())
            X = _compress_const(effects[o], faces[o])
            out[blk.label] = X if lam == first else np.zeros((blk.size, blk.size))
    return out


def honest_shannon_blocks(target: str, problem: SDPProblem, ensemble: Ensemble, effects) -> dict:
    """Moment blocks ``[[1, z], [z, z^2]] (x) G_w`` with the optimal z per (i, J)."""
    quad = radau_quadrature(problem.labels["m"])
    rho = np.real(ensemble.states[problem.labels["x_star"]])
    faces = problem.labels["faces"]
    labels = {b.label for b in problem.blocks}
    outs = _outcomes(target)
    out = {}
    for i in quad.interior:
        ti = float(quad.nodes[i])
        for J in _guesses(target):
            pJ = sum(float(np.trace(rho @ effects[_tag(o)])) for o in outs if _match(target, J, o))
            z = -pJ / ((1 - ti) * pJ + ti)
            mom = np.array([[1.0, z], [z, z * z]])
            for o in outs:
                lab = f"node={i} guess={_tag(J)} out={_tag(o)}"
                if lab in labels:
                    out[lab] = np.kron(mom, _compress_const(effects[_tag(o)], faces[_tag(o)]))
    return out


def outcome_tag(t) -> str:
    return _tag(t)

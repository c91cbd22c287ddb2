"""Primal-dual interior-point solver for :class:`SDPProblem`.

Internally the LMI side is the dual of the standard pair

    (P)  min <C, X> + f.nu   s.t.  A(X) + E^T nu = b,  X >= 0
    (D)  max b.y             s.t.  A*(y) + S = C,  E y = f,  S >= 0

with ``C = F0`` and ``A_i = -F_i``. Search directions are HKM with a
Mehrotra predictor-corrector; blocks of equal size are processed as stacked
arrays. The Schur complement is assembled sparsely and solved together with
the equality rows as one saddle-point system.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .problem import SDPProblem, collapse, embed

log = logging.getLogger(__name__)

DENSE_LIMIT = 800
ACCEPT_RESIDUAL = 1e-8
ACCEPT_GAP = 1e-7


@dataclass
class SDPSolution:
    primal_value: float
    dual_value: float
    gap: float
    primal_blocks: list
    dual_multipliers: dict
    status: str  # optimal | infeasible | numerical-trouble
    y: np.ndarray
    nu: np.ndarray
    iterations: int
    residuals: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


class _Group:
    """All blocks of one size, stacked."""

    def __init__(self, size, members, C, Aloc, vidx, nvar):
        self.n = size
        self.members = members  # indices into problem.blocks
        self.C = C  # (K, n, n)
        self.A = Aloc  # (K, V, n, n), zero-padded
        self.vidx = vidx  # (K, V), padding points at nvar
        self.nvar = nvar

    def Astar(self, yext):
        return np.einsum("kv,kvij->kij", yext[self.vidx], self.A)

    def Aop(self, X, out):
        vals = np.einsum("kvij,kij->kv", self.A, X)
        np.add.at(out, self.vidx, vals)


def _prepare(problem: SDPProblem):
    real_blocks = []
    for blk in problem.blocks:
        if blk.is_complex:
            F0 = embed(blk.F0)
            mats = np.array([embed(m) for m in blk.mats]).reshape(len(blk.mats), 2 * blk.size, 2 * blk.size)
        else:
            F0, mats = blk.F0.real, blk.mats.real
        real_blocks.append((F0.shape[0], F0, blk.vars, mats))
    sizes = sorted({rb[0] for rb in real_blocks})
    groups = []
    nvar = problem.nvar
    for n in sizes:
        members = [k for k, rb in enumerate(real_blocks) if rb[0] == n]
        V = max(1, max(len(real_blocks[k][2]) for k in members))
        K = len(members)
        C = np.zeros((K, n, n))
        Aloc = np.zeros((K, V, n, n))
        vidx = np.full((K, V), nvar, dtype=int)
        for row, k in enumerate(members):
            _, F0, vars_, mats = real_blocks[k]
            C[row] = F0
            nv = len(vars_)
            Aloc[row, :nv] = -mats
            vidx[row, :nv] = vars_
        groups.append(_Group(n, members, C, Aloc, vidx, nvar))
    return groups


def _sym(a):
    return (a + np.swapaxes(a, -1, -2)) / 2


def _max_step(X, dX):
    """Largest alpha with X + alpha dX >= 0 (inf if unconstrained)."""
    L = np.linalg.cholesky(X)
    Li = np.linalg.inv(L)
    T = _sym(Li @ dX @ np.swapaxes(Li, -1, -2))
    lam = np.linalg.eigvalsh(T)[..., 0].min()
    return math.inf if lam >= 0 else -1.0 / lam


def _restore_feasibility(groups, X, nu, b, E, Aop, Astar):
    """Correct (X, nu) onto A(X) + E^T nu = b with a step of the form X A*(w) X.

    Scaling the step by X keeps it small along directions where X is nearly
    singular, so the corrected blocks usually stay PSD. Returns the pair and
    whether they did, in which case the objective is that of a feasible point.
    """
    m = b.shape[0]
    p = E.shape[0]
    rp = b - Aop(X) - (E.T @ nu if p else 0.0)
    G = np.zeros((m + 1, m + 1))
    for g, Xg in zip(groups, X):
        AX = np.einsum("kvij,kjl->kvil", g.A, Xg)
        Gk = np.einsum("kvab,kwba->kvw", AX, AX)
        V = g.vidx.shape[1]
        np.add.at(G, (np.repeat(g.vidx, V, axis=1), np.tile(g.vidx, (1, V))), Gk.reshape(len(Gk), -1))
    K = np.hstack([G[:m, :m], E.T.toarray()]) if p else G[:m, :m]
    sol, *_ = la.lstsq(K, rp)
    w, dnu = sol[:m], sol[m:]
    Xc = [x + _sym(x @ a @ x) for x, a in zip(X, Astar(w))]
    psd = all(float(np.linalg.eigvalsh(x)[..., 0].min()) >= 0 for x in Xc)
    return Xc, nu + dnu, psd


def _inner(As, Bs):
    return float(sum(np.einsum("kij,kij->", a, b) for a, b in zip(As, Bs)))


def solve(problem: SDPProblem, tol: float = 1e-8, max_iter: int = 200) -> SDPSolution:
    groups = _prepare(problem)
    m = problem.nvar
    E = problem.E.tocsr()
    p = E.shape[0]
    f = problem.f
    minimize_lmi = problem.lmi_sense == "minimize"
    b = -problem.c if minimize_lmi else problem.c.copy()
    # work with a unit objective so the iterates do not depend on its scale
    bscale = float(np.linalg.norm(b)) or 1.0
    b = b / bscale
    N = sum(g.C.shape[0] * g.n for g in groups)

    # column norms of A for the starting point
    anorm = np.zeros(m + 1)
    for g in groups:
        np.add.at(anorm, g.vidx, np.einsum("kvij,kvij->kv", g.A, g.A))
    anorm = np.sqrt(anorm[:m])
    cnorm = math.sqrt(sum(float(np.sum(g.C**2)) for g in groups))
    bnorm = float(np.linalg.norm(b))
    fnorm = float(np.linalg.norm(f))
    sqn = math.sqrt(N)
    xi = max(10.0, sqn, sqn * float(np.max((1 + np.abs(b)) / (1 + anorm), initial=1.0)))
    eta = max(10.0, sqn, float(np.max(anorm, initial=0.0)), cnorm)

    X = [xi * np.broadcast_to(np.eye(g.n), g.C.shape).copy() for g in groups]
    S = [eta * np.broadcast_to(np.eye(g.n), g.C.shape).copy() for g in groups]
    y = np.zeros(m)
    nu = np.zeros(p)

    def Aop(Xs):
        out = np.zeros(m + 1)
        for g, Xg in zip(groups, Xs):
            g.Aop(Xg, out)
        return out[:m]

    def Astar(vec):
        ext = np.append(vec, 0.0)
        return [g.Astar(ext) for g in groups]

    status = "numerical-trouble"
    best = None
    it = 0
    stall = 0
    last_merit = math.inf
    for it in range(1, max_iter + 1):
        ETnu = E.T @ nu if p else np.zeros(m)
        rp = b - Aop(X) - ETnu
        Rd = [g.C - As - Sg for g, As, Sg in zip(groups, Astar(y), S)]
        re = f - E @ y if p else np.zeros(0)
        mu = _inner(X, S) / N
        pobj = _inner([g.C for g in groups], X) + float(f @ nu)
        dobj = float(b @ y)
        relp = float(np.linalg.norm(rp)) / (1 + bnorm)
        reld = max(
            math.sqrt(sum(float(np.sum(r**2)) for r in Rd)) / (1 + cnorm),
            (float(np.linalg.norm(re)) / (1 + fnorm)) if p else 0.0,
        )
        relgap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        merit = max(relp, reld, relgap)
        log.debug("it %d pobj %.10g dobj %.10g relp %.2e reld %.2e gap %.2e", it, pobj, dobj, relp, reld, relgap)
        if best is None or merit < best[0]:
            best = (merit, [x.copy() for x in X], y.copy(), nu.copy(), relp, reld, relgap)
        if merit <= tol:
            status = "optimal"
            break
        ynorm = float(np.linalg.norm(y))
        xnorm = sum(float(np.trace(x, axis1=1, axis2=2).sum()) for x in X)
        if ynorm > 1e10 or xnorm > 1e10:
            status = "infeasible"
            break
        stall = stall + 1 if merit > 0.9 * last_merit else 0
        last_merit = min(last_merit, merit)
        if stall > 25:
            break

        try:
            Sinv = [np.linalg.inv(s) for s in S]
            # Schur complement M_vw = tr(A_v X A_w S^-1), per block then scattered
            rows, cols, vals = [], [], []
            for g, Xg, Si in zip(groups, X, Sinv):
                P = np.einsum("kvij,kjl->kvil", g.A, Xg)
                Q = np.einsum("kwij,kjl->kwil", g.A, Si)
                Mk = np.einsum("kvab,kwba->kvw", P, Q)
                V = g.vidx.shape[1]
                rows.append(np.repeat(g.vidx, V, axis=1).ravel())
                cols.append(np.tile(g.vidx, (1, V)).ravel())
                vals.append(Mk.ravel())
            rows = np.concatenate(rows)
            cols = np.concatenate(cols)
            vals = np.concatenate(vals)
            keep = (rows < m) & (cols < m)
            M = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(m, m)).tocsc()
            diag = M.diagonal()
            reg = 1e-14 * max(1.0, float(np.max(np.abs(diag), initial=1.0)))
            KKT = sp.bmat([[M + reg * sp.eye(m), E.T if p else None], [E if p else None, None]], format="csc") if p else (M + reg * sp.eye(m)).tocsc()
            if m + p <= DENSE_LIMIT:
                lu = la.lu_factor(KKT.toarray(), check_finite=True)
                kkt_solve = lambda r: la.lu_solve(lu, r)  # noqa: E731
            else:
                lu = spla.splu(KKT)
                kkt_solve = lu.solve

            XRS = [_sym(x @ r @ si) for x, r, si in zip(X, Rd, Sinv)]

            def direction(G0):
                rhs = np.concatenate([rp - Aop(G0), re])
                sol = kkt_solve(rhs)
                dy, dnu = sol[:m], sol[m:]
                Ady = Astar(dy)
                dS = [r - a for r, a in zip(Rd, Ady)]
                dX = [g0 + _sym(x @ a @ si) for g0, x, a, si in zip(G0, X, Ady, Sinv)]
                return dX, dy, dnu, dS

            G0 = [-x - xr for x, xr in zip(X, XRS)]
            dXa, dya, dnua, dSa = direction(G0)
            ap = min(1.0, min(_max_step(x, d) for x, d in zip(X, dXa)))
            ad = min(1.0, min(_max_step(s, d) for s, d in zip(S, dSa)))
            mu_aff = _inner([x + ap * d for x, d in zip(X, dXa)], [s + ad * d for s, d in zip(S, dSa)]) / N
            sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3))
            G0 = [
                sigma * mu * si - x - xr - _sym(dxa @ dsa @ si)
                for si, x, xr, dxa, dsa in zip(Sinv, X, XRS, dXa, dSa)
            ]
            dX, dy, dnu, dS = direction(G0)
            gamma = 0.9 if it < 3 else 0.98
            ap = min(1.0, gamma * min(_max_step(x, d) for x, d in zip(X, dX)))
            ad = min(1.0, gamma * min(_max_step(s, d) for s, d in zip(S, dS)))
        except (np.linalg.LinAlgError, RuntimeError, ValueError) as exc:
            log.debug("linear algebra failure: %s", exc)
            break
        if not (np.all(np.isfinite(dy)) and math.isfinite(ap) and math.isfinite(ad)):
            break
        X = [x + ap * d for x, d in zip(X, dX)]
        nu = nu + ap * dnu
        y = y + ad * dy
        S = [s + ad * d for s, d in zip(S, dS)]

    if status != "optimal" and status != "infeasible" and best is not None:
        _, X, y, nu, relp, reld, relgap = best
        pobj = _inner([g.C for g in groups], X) + float(f @ nu)
        dobj = float(b @ y)
        # early exit (stall or a failed factorization near the boundary) still
        # counts as solved when the reported accuracy guarantees hold
        if max(relp, reld) <= ACCEPT_RESIDUAL and relgap <= ACCEPT_GAP:
            status = "optimal"
    # report the conic value of an exactly feasible point when one is at hand
    primal_feasible = False
    if status == "optimal":
        try:
            Xc, nuc, primal_feasible = _restore_feasibility(groups, X, nu, b, E, Aop, Astar)
        except (np.linalg.LinAlgError, ValueError) as exc:
            log.debug("primal restoration failed: %s", exc)
            primal_feasible = False
        if primal_feasible:
            X, nu = Xc, nuc
            pobj = _inner([g.C for g in groups], X) + float(f @ nu)
    # LMI value and conic value in the problem's own orientation
    sign = -1.0 if minimize_lmi else 1.0
    primal_value = problem.c0 + sign * bscale * pobj
    dual_value = problem.c0 + sign * bscale * dobj
    X = [x * bscale for x in X]
    blocks = [None] * len(problem.blocks)
    for g, Xg in zip(groups, X):
        for row, k in enumerate(g.members):
            xb = Xg[row]
            blocks[k] = collapse(xb) if problem.blocks[k].is_complex else xb
    return SDPSolution(
        primal_value=float(primal_value),
        dual_value=float(dual_value),
        gap=float(abs(primal_value - dual_value)),
        primal_blocks=blocks,
        dual_multipliers=problem.unpack(y),
        status=status,
        y=y,
        nu=sign * bscale * nu,
        iterations=it,
        residuals={"primal": relp, "dual": reld, "gap": relgap, "primal_feasible": primal_feasible},
    )

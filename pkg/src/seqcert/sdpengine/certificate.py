"""Dual-certificate checking with safe rounding, and a text dump of problems.

A certificate is a point ``y`` on the LMI side. Any feasible ``y`` bounds the
conic optimum by weak duality, so the checker repairs small defects instead
of trusting the solver:

1. sign-constrained scalars (1x1 blocks ``+-y_i >= 0``) are clipped;
2. the equality residual is removed by a least-norm correction;
3. the problem's declared inflation direction ``e`` (``E e = 0`` and
   ``sum_i e_i F_ik >= 0``) is added with the smallest step ``t`` that makes
   every block PSD, plus a small safety factor.

The objective at the repaired point is the certified value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from ..matops import min_eigenvalue
from .problem import SDPProblem

MAX_VIOLATION = 1e-4
SAFETY = 1e-12


@dataclass(frozen=True)
class DualCertificate:
    multipliers: dict
    slack_margin: float = float("nan")
    certified_value: float = float("nan")
    valid: bool = False
    inflation: float = 0.0
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        def enc(v):
            if isinstance(v, np.ndarray):
                if np.iscomplexobj(v):
                    return {"re": v.real.tolist(), "im": v.imag.tolist()}
                return v.tolist()
            return v

        return {
            "multipliers": {k: enc(v) for k, v in self.multipliers.items()},
            "slack_margin": self.slack_margin,
            "certified_value": self.certified_value,
            "valid": self.valid,
            "inflation": self.inflation,
        }

    @staticmethod
    def from_json(doc: dict) -> "DualCertificate":
        def dec(v):
            if isinstance(v, dict):
                return np.array(v["re"]) + 1j * np.array(v["im"])
            if isinstance(v, list):
                return np.array(v, dtype=float)
            return float(v)

        return DualCertificate(
            multipliers={k: dec(v) for k, v in doc["multipliers"].items()},
            slack_margin=float(doc.get("slack_margin", float("nan"))),
            certified_value=float(doc.get("certified_value", float("nan"))),
            valid=bool(doc.get("valid", False)),
            inflation=float(doc.get("inflation", 0.0)),
        )


def _block_min_eigs(problem: SDPProblem, y, exact: bool = True) -> np.ndarray:
    if exact:
        return np.array([min_eigenvalue(blk.value(y)) for blk in problem.blocks])
    # batched by size; used inside the bisection only
    out = np.empty(len(problem.blocks))
    by_size: dict[int, list[int]] = {}
    for k, blk in enumerate(problem.blocks):
        by_size.setdefault(blk.size, []).append(k)
    for ks in by_size.values():
        vals = np.array([problem.blocks[k].value(y) for k in ks])
        out[ks] = np.linalg.eigvalsh(vals)[:, 0]
    return out


def _sign_bounds(problem: SDPProblem):
    """(var, sign) for every 1x1 block that is just ``sign * y_var >= 0``."""
    out = []
    for blk in problem.blocks:
        if blk.size == 1 and len(blk.vars) == 1 and blk.F0[0, 0] == 0:
            coef = float(np.real(blk.mats[0, 0, 0]))
            if coef != 0:
                out.append((int(blk.vars[0]), 1.0 if coef > 0 else -1.0))
    return out


def _project_equalities(problem: SDPProblem, y, frozen):
    if problem.E.shape[0] == 0:
        return y, 0.0
    E = problem.E.toarray()
    res = problem.f - E @ y
    before = float(np.max(np.abs(res), initial=0.0))
    free = np.ones(problem.nvar, dtype=bool)
    free[list(frozen)] = False
    if before > 0:
        corr, *_ = np.linalg.lstsq(E[:, free], res, rcond=None)
        y = y.copy()
        y[free] += corr
    return y, before


def verify_certificate(problem: SDPProblem, candidate: DualCertificate) -> DualCertificate:
    y = problem.pack(candidate.multipliers)
    bounds = _sign_bounds(problem)
    for v, s in bounds:
        if s * y[v] < 0:
            y[v] = 0.0
    y, eq_before = _project_equalities(problem, y, [v for v, _ in bounds])
    eq_after = 0.0
    if problem.E.shape[0]:
        eq_after = float(np.max(np.abs(problem.f - problem.E @ y), initial=0.0))

    lam = _block_min_eigs(problem, y)
    margin = float(np.max(-lam))  # > 0 means some block is not PSD
    details = {"equality_residual_in": eq_before, "equality_residual_out": eq_after}
    t = 0.0
    if margin > 0:
        if problem.inflation is None:
            return replace(candidate, slack_margin=margin, valid=False, details=details)
        e = problem.inflation
        t = _inflation_step(problem, y, e, margin)
        if t is None:
            details["reason"] = "inflation direction cannot absorb the violation"
            return replace(candidate, slack_margin=margin, valid=False, details=details)
        t = t * (1 + 1e-6) + SAFETY
        y = y + t * e
    lam_after = _block_min_eigs(problem, y)
    worst_after = float(np.max(-lam_after))
    details.update(post_rounding_violation=max(0.0, worst_after), min_eigenvalue_after=float(lam_after.min()))
    valid = margin <= MAX_VIOLATION and worst_after <= 0.0 and eq_after <= 1e-12
    if not margin <= MAX_VIOLATION:
        details["reason"] = f"violation {margin:.3e} exceeds {MAX_VIOLATION:g}"
    return DualCertificate(
        multipliers=problem.unpack(y),
        slack_margin=margin,
        certified_value=problem.objective(y),
        valid=bool(valid),
        inflation=float(t),
        details=details,
    )


def _inflation_step(problem, y, e, margin):
    """Smallest t >= 0 with every block of y + t e PSD, by bisection."""
    def ok(t):
        return bool(np.all(_block_min_eigs(problem, y + t * e, exact=False) >= 0))

    hi = max(margin, 1e-15)
    for _ in range(60):
        if ok(hi):
            break
        hi *= 2
        if hi > 1e3:
            return None
    else:
        return None
    lo = 0.0
    for _ in range(60):
        mid = (lo + hi) / 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-3 * hi:
            break
    return hi


def dump_problem(problem: SDPProblem, stream) -> None:
    """Write a sparse-triplet text form of ``problem``.

    Format, one record per line::

        sense <maximize|minimize>  nvar <n>  c0 <value>
        c <var> <value>
        block <k> <label> <size> <complex 0|1>
        F <k> <var|-1 for F0> <row> <col> <re> <im>   (upper triangle, nonzeros)
        eq <row> <var> <value>
        rhs <row> <value>
    """
    w = stream.write
    w(f"sense {problem.sense} nvar {problem.nvar} c0 {problem.c0!r}\n")
    for v in np.flatnonzero(problem.c):
        w(f"c {v} {problem.c[v]!r}\n")
    for k, blk in enumerate(problem.blocks):
        w(f"block {k} {json.dumps(blk.label)} {blk.size} {int(blk.is_complex)}\n")
        for var, mat in [(-1, blk.F0), *zip(blk.vars.tolist(), blk.mats)]:
            for i in range(blk.size):
                for j in range(i, blk.size):
                    z = complex(mat[i, j])
                    if z != 0:
                        w(f"F {k} {var} {i} {j} {z.real!r} {z.imag!r}\n")
    E = problem.E.tocoo()
    for r, v, val in zip(E.row, E.col, E.data):
        w(f"eq {r} {v} {val!r}\n")
    for r, val in enumerate(problem.f):
        w(f"rhs {r} {val!r}\n")


def primal_residual(problem: SDPProblem, blocks: dict) -> dict:
    """Check a conic-side point given by its PSD blocks (keyed by label).

    Blocks not supplied must be 1x1 sign blocks; their values and the free
    equality multipliers are fitted by least squares. Returns the stationarity
    residual, the most negative eigenvalue among all blocks and the objective.
    """
    s = 1.0 if problem.lmi_sense == "minimize" else -1.0
    lhs = np.zeros(problem.nvar)
    const = 0.0
    min_eig = np.inf
    free_cols = []
    for blk in problem.blocks:
        if blk.label in blocks:
            X = np.asarray(blocks[blk.label])
            min_eig = min(min_eig, min_eigenvalue(X))
            lhs[blk.vars] += np.real(np.einsum("kij,ji->k", blk.mats, X))
            const += float(np.real(np.trace(blk.F0 @ X)))
        elif blk.size == 1:
            col = np.zeros(problem.nvar)
            col[blk.vars] = np.real(blk.mats[:, 0, 0])
            free_cols.append((col, float(np.real(blk.F0[0, 0]))))
        else:
            raise KeyError(f"no value supplied for block {blk.label!r}")
    E = problem.E.toarray()
    cols = [c for c, _ in free_cols] + list(E)
    target = s * problem.c - lhs
    if cols:
        Amat = np.array(cols).T
        sol, *_ = np.linalg.lstsq(Amat, target, rcond=None)
    else:
        Amat = np.zeros((problem.nvar, 0))
        sol = np.zeros(0)
    resid = target - Amat @ sol
    k = len(free_cols)
    scal = sol[:k]
    nu = sol[k:]
    if k:
        min_eig = min(min_eig, float(scal.min()))
    const += sum(v * f0 for v, (_, f0) in zip(scal, free_cols))
    value = problem.c0 - s * (const - float(problem.f @ nu))
    return {
        "residual": float(np.max(np.abs(resid), initial=0.0)),
        "min_eigenvalue": float(min_eig),
        "value": float(value),
        "slacks": scal,
    }

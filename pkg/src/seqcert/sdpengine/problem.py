"""Block-structured SDPs in linear-matrix-inequality form.

A problem is stored from the side of its scalar/matrix multipliers ``y``::

    optimize  c.y + c0   subject to   F0_k + sum_i y_i F_ik >= 0  (each block k)
                                      E y = f

Its conic dual runs over one PSD matrix per block (plus free scalars for the
equalities); that side is what the certification programs call the primal.
``sense`` names the direction of that primal, so a ``maximize`` problem has
its LMI side minimized (giving upper bounds) and vice versa.

Expressions are assembled with :class:`Affine`, a small affine-matrix type
keyed by variable index, through :class:`ProblemBuilder`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

SENSES = ("maximize", "minimize")


class Affine:
    """``const + sum_v y_v * coef[v]`` with array-valued coefficients."""

    __slots__ = ("const", "terms")

    def __init__(self, const, terms: Mapping[int, np.ndarray] | None = None):
        self.const = np.asarray(const)
        self.terms = dict(terms or {})

    @property
    def shape(self):
        return self.const.shape

    @staticmethod
    def constant(value) -> "Affine":
        return Affine(np.asarray(value))

    def _coerce(self, other) -> "Affine":
        if isinstance(other, Affine):
            return other
        return Affine(np.broadcast_to(np.asarray(other), self.shape).copy())

    def __add__(self, other):
        other = self._coerce(other)
        terms = dict(self.terms)
        for v, a in other.terms.items():
            terms[v] = terms[v] + a if v in terms else a
        return Affine(self.const + other.const, terms)

    __radd__ = __add__

    def __neg__(self):
        return Affine(-self.const, {v: -a for v, a in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, k):
        if isinstance(k, Affine):
            raise TypeError("products of affine expressions are not affine")
        k = np.asarray(k)
        return Affine(self.const * k, {v: a * k for v, a in self.terms.items()})

    __rmul__ = __mul__

    def kron(self, m) -> "Affine":
        """Scalar expression times a constant matrix."""
        if self.shape != ():
            raise ValueError("kron expects a scalar expression")
        m = np.asarray(m)
        return Affine(self.const * m, {v: a * m for v, a in self.terms.items()})

    def trace(self) -> "Affine":
        return Affine(np.trace(self.const), {v: np.trace(a) for v, a in self.terms.items()})

    @property
    def T(self) -> "Affine":
        return Affine(self.const.T, {v: a.T for v, a in self.terms.items()})

    def matmul_const(self, left=None, right=None) -> "Affine":
        def f(a):
            if left is not None:
                a = left @ a
            if right is not None:
                a = a @ right
            return a

        return Affine(f(self.const), {v: f(a) for v, a in self.terms.items()})

    def value(self, y) -> np.ndarray:
        out = np.array(self.const, dtype=np.result_type(self.const, float))
        for v, a in self.terms.items():
            out = out + y[v] * a
        return out

    @staticmethod
    def block(rows) -> "Affine":
        """Assemble ``[[A, B], [C, D]]``-style block matrices."""
        rows = [[r if isinstance(r, Affine) else Affine.constant(r) for r in row] for row in rows]
        const = np.block([[e.const for e in row] for row in rows])
        keys = sorted({v for row in rows for e in row for v in e.terms})
        terms = {}
        for v in keys:
            terms[v] = np.block(
                [[e.terms.get(v, np.zeros_like(e.const, dtype=float)) for e in row] for row in rows]
            )
        return Affine(const, terms)


def affine_sum(items: Iterable[Affine]) -> Affine:
    items = list(items)
    out = items[0]
    for it in items[1:]:
        out = out + it
    return out


@dataclass(frozen=True)
class VariableGroup:
    name: str
    start: int
    stop: int
    kind: str  # scalar | symmetric | traceless | antisymmetric | hermitian | traceless-hermitian
    dim: int
    basis: np.ndarray | None  # (count, dim, dim), None for scalars

    def unpack(self, y):
        vals = np.asarray(y[self.start : self.stop])
        if self.basis is None:
            return float(vals[0])
        return np.tensordot(vals, self.basis, axes=1)


@dataclass(frozen=True)
class LMIBlock:
    label: str
    size: int
    F0: np.ndarray
    vars: np.ndarray  # variable indices touching the block
    mats: np.ndarray  # (len(vars), size, size)
    is_complex: bool = False

    def value(self, y) -> np.ndarray:
        return self.F0 + np.tensordot(np.asarray(y)[self.vars], self.mats, axes=1)


@dataclass(frozen=True)
class SDPProblem:
    nvar: int
    c: np.ndarray
    c0: float
    sense: str
    blocks: tuple[LMIBlock, ...]
    E: sp.csr_matrix
    f: np.ndarray
    groups: Mapping[str, VariableGroup]
    inflation: np.ndarray | None = None
    labels: Mapping[str, object] = field(default_factory=dict)

    @property
    def lmi_sense(self) -> str:
        return "minimize" if self.sense == "maximize" else "maximize"

    def objective(self, y) -> float:
        return float(self.c @ np.asarray(y) + self.c0)

    def unpack(self, y) -> dict:
        return {name: g.unpack(y) for name, g in self.groups.items()}

    def pack(self, values: Mapping[str, object]) -> np.ndarray:
        y = np.zeros(self.nvar)
        for name, g in self.groups.items():
            if name not in values:
                raise KeyError(f"missing multiplier {name!r}")
            v = values[name]
            if g.basis is None:
                y[g.start] = float(v)
                continue
            v = np.asarray(v)
            # basis matrices are orthogonal, so coordinates are projections
            norms = np.einsum("kij,kij->k", g.basis.conj(), g.basis).real
            coords = np.einsum("kij,ij->k", g.basis.conj(), v).real / norms
            y[g.start : g.stop] = coords
        return y

    def scaled(self, k: float) -> "SDPProblem":
        """Same feasible set, objective multiplied by ``k > 0``."""
        if not k > 0:
            raise ValueError("scale factor must be positive")
        return SDPProblem(
            nvar=self.nvar, c=self.c * k, c0=self.c0 * k, sense=self.sense,
            blocks=self.blocks, E=self.E, f=self.f, groups=self.groups,
            inflation=self.inflation, labels=self.labels,
        )

    def block_values(self, y) -> list[np.ndarray]:
        return [b.value(y) for b in self.blocks]


def _sym_basis(n: int) -> np.ndarray:
    out = []
    for i in range(n):
        e = np.zeros((n, n))
        e[i, i] = 1.0
        out.append(e)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n))
            e[i, j] = e[j, i] = 1.0
            out.append(e)
    return np.array(out)


def _traceless_basis(n: int) -> np.ndarray:
    out = []
    for i in range(n - 1):
        e = np.zeros((n, n))
        e[i, i] = 1.0
        e[n - 1, n - 1] = -1.0
        out.append(e)
    out.extend(_sym_basis(n)[n:])
    # orthogonalize the diagonal part so pack() can project
    mats = np.array(out)
    k = n - 1
    if k > 1:
        diag = mats[:k].reshape(k, -1)
        q, _ = np.linalg.qr(diag.T)
        mats[:k] = q.T.reshape(k, n, n)
    return mats


def _antisym_basis(n: int) -> np.ndarray:
    out = []
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n))
            e[i, j], e[j, i] = 1.0, -1.0
            out.append(e)
    return np.array(out).reshape(-1, n, n)


def _imag_basis(n: int) -> np.ndarray:
    return 1j * _antisym_basis(n)


class ProblemBuilder:
    def __init__(self, sense: str):
        if sense not in SENSES:
            raise ValueError(f"sense must be one of {SENSES}")
        self.sense = sense
        self.nvar = 0
        self.groups: dict[str, VariableGroup] = {}
        self._lmis: list[tuple[str, Affine]] = []
        self._eqs: list[tuple[Affine, np.ndarray]] = []
        self._objective: Affine | None = None
        self._inflation: dict[int, float] = {}
        self.labels: dict[str, object] = {}

    def _new(self, name: str, kind: str, dim: int, basis) -> tuple[VariableGroup, list[int]]:
        if name in self.groups:
            raise ValueError(f"duplicate variable {name!r}")
        count = 1 if basis is None else len(basis)
        g = VariableGroup(name, self.nvar, self.nvar + count, kind, dim, basis)
        self.groups[name] = g
        self.nvar += count
        return g, list(range(g.start, g.stop))

    def scalar(self, name: str) -> Affine:
        _, idx = self._new(name, "scalar", 1, None)
        return Affine(np.array(0.0), {idx[0]: np.array(1.0)})

    def _matrix(self, name, kind, n, basis) -> Affine:
        _, idx = self._new(name, kind, n, basis)
        dtype = basis.dtype
        return Affine(np.zeros((n, n), dtype=dtype), dict(zip(idx, basis)))

    def symmetric(self, name: str, n: int) -> Affine:
        return self._matrix(name, "symmetric", n, _sym_basis(n))

    def traceless(self, name: str, n: int) -> Affine:
        return self._matrix(name, "traceless", n, _traceless_basis(n))

    def antisymmetric(self, name: str, n: int) -> Affine:
        return self._matrix(name, "antisymmetric", n, _antisym_basis(n))

    def hermitian(self, name: str, n: int) -> Affine:
        basis = np.concatenate([_sym_basis(n).astype(complex), _imag_basis(n)])
        return self._matrix(name, "hermitian", n, basis)

    def traceless_hermitian(self, name: str, n: int) -> Affine:
        basis = np.concatenate([_traceless_basis(n).astype(complex), _imag_basis(n)])
        return self._matrix(name, "traceless-hermitian", n, basis)

    def psd(self, label: str, expr: Affine) -> None:
        if expr.shape == ():
            expr = expr.kron(np.ones((1, 1)))
        self._lmis.append((label, expr))

    def nonneg(self, label: str, expr: Affine) -> None:
        self.psd(label, expr)

    def equal(self, lhs: Affine, rhs=0.0) -> None:
        """Impose ``lhs == rhs``; matrix equalities use their upper triangle."""
        self._eqs.append((lhs, np.asarray(rhs)))

    def objective(self, expr: Affine) -> None:
        self._objective = expr

    def inflate(self, expr: Affine, amount) -> None:
        """Declare the safe-rounding direction: move ``expr`` by ``amount``."""
        # expr is a bare variable group (e.g. R) and amount has its shape
        amount = np.asarray(amount, dtype=float)
        basis_terms = expr.terms
        mats = np.array([np.asarray(a) for a in basis_terms.values()])
        if amount.ndim == 0:
            coords = np.array([float(amount)]) if len(mats) == 1 else None
            if coords is None:
                raise ValueError("scalar inflation needs a scalar expression")
        else:
            norms = np.einsum("kij,kij->k", mats.conj(), mats).real
            coords = np.einsum("kij,ij->k", mats.conj(), amount).real / norms
        for v, cv in zip(basis_terms.keys(), coords):
            self._inflation[v] = self._inflation.get(v, 0.0) + float(cv)

    def build(self) -> SDPProblem:
        if self._objective is None:
            raise ValueError("objective not set")
        if not self._lmis:
            raise ValueError("at least one LMI block is required")
        c = np.zeros(self.nvar)
        for v, a in self._objective.terms.items():
            c[v] += float(np.real(a))
        blocks = []
        for label, expr in self._lmis:
            blocks.append(_make_block(label, expr))
        rows, cols, vals, rhs = [], [], [], []
        r = 0
        for lhs, target in self._eqs:
            target = np.broadcast_to(target, lhs.shape)
            if lhs.shape == ():
                entries = [((), False)]
            else:
                n = lhs.shape[0]
                entries = [((i, j), False) for i in range(n) for j in range(i, n)]
                if np.iscomplexobj(lhs.const) or any(np.iscomplexobj(a) for a in lhs.terms.values()):
                    entries += [((i, j), True) for i in range(n) for j in range(i + 1, n)]
            for pos, imag in entries:
                part = np.imag if imag else np.real
                for v, a in lhs.terms.items():
                    val = float(part(a[pos]))
                    if val != 0.0:
                        rows.append(r)
                        cols.append(v)
                        vals.append(val)
                rhs.append(float(part(target[pos] - lhs.const[pos])))
                r += 1
        E = sp.csr_matrix((vals, (rows, cols)), shape=(r, self.nvar))
        infl = None
        if self._inflation:
            infl = np.zeros(self.nvar)
            for v, a in self._inflation.items():
                infl[v] = a
        return SDPProblem(
            nvar=self.nvar, c=c, c0=float(np.real(self._objective.const)), sense=self.sense,
            blocks=tuple(blocks), E=E, f=np.array(rhs), groups=dict(self.groups),
            inflation=infl, labels=dict(self.labels),
        )


def _make_block(label: str, expr: Affine) -> LMIBlock:
    n = expr.shape[0]
    if expr.shape != (n, n):
        raise ValueError(f"block {label!r} is not square")
    items = sorted(expr.terms.items())
    is_complex = np.iscomplexobj(expr.const) or any(np.iscomplexobj(a) for _, a in items)
    dtype = complex if is_complex else float
    F0 = np.asarray(expr.const, dtype=dtype)
    mats = [np.asarray(a, dtype=dtype) for _, a in items]
    for m in [F0, *mats]:
        if np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(m), initial=0.0)):
            raise ValueError(f"block {label!r} has a non-Hermitian coefficient")
    keep = [k for k, m in enumerate(mats) if np.any(m != 0)]
    vars_ = np.array([items[k][0] for k in keep], dtype=int)
    mats = np.array([mats[k] for k in keep], dtype=dtype).reshape(len(keep), n, n)
    F0 = (F0 + F0.conj().T) / 2
    mats = (mats + np.conj(np.transpose(mats, (0, 2, 1)))) / 2
    return LMIBlock(label, n, F0, vars_, mats, bool(is_complex))


def embed(h: np.ndarray) -> np.ndarray:
    """Real symmetric image ``[[Re, -Im], [Im, Re]]`` of a Hermitian matrix."""
    a, b = np.real(h), np.imag(h)
    return np.block([[a, -b], [b, a]])


def collapse(x: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`embed`: ``<collapse(X), H> = <X, embed(H)>``."""
    n = x.shape[0] // 2
    x11, x12, x21, x22 = x[:n, :n], x[:n, n:], x[n:, :n], x[n:, n:]
    return (x11 + x22) + 1j * (x21 - x12)

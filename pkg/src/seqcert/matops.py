"""Dense Hermitian matrix helpers shared by the rest of the package.

Matrices are plain ``numpy`` arrays. Every function that accepts an operator
checks Hermiticity itself, so callers can pass solver output directly.
"""

from __future__ import annotations

import numpy as np

HERMITIAN_ATOL = 1e-9
IMAG_ATOL = 1e-12


class NotHermitianError(ValueError):
    pass


def _as_square(a) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def hermitian(a, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    """Return ``(a + a^H) / 2`` after checking the antihermitian residual.

    The result is read-only; real input stays real.
    """
    a = _as_square(a)
    a = a.astype(np.complex128 if np.iscomplexobj(a) else np.float64)
    resid = np.max(np.abs(a - a.conj().T), initial=0.0)
    if resid > atol * max(1.0, np.max(np.abs(a), initial=0.0)):
        raise NotHermitianError(f"matrix is not Hermitian (residual {resid:.3e})")
    h = (a + a.conj().T) / 2
    h.setflags(write=False)
    return h


def min_eigenvalue(h) -> float:
    return float(np.linalg.eigvalsh(hermitian(h))[0])


def max_eigenvalue(h) -> float:
    return float(np.linalg.eigvalsh(hermitian(h))[-1])


def frobenius_inner(a, b) -> float:
    """``Tr[A B]`` for Hermitian ``A`` and ``B``; the imaginary part must vanish."""
    a = hermitian(a)
    b = hermitian(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    val = np.sum(a * b.T)
    if abs(np.imag(val)) > IMAG_ATOL * max(1.0, abs(val)):
        raise NotHermitianError(f"Tr[AB] has imaginary part {np.imag(val):.3e}")
    return float(np.real(val))


def is_psd(h, atol: float = 1e-10) -> bool:
    return min_eigenvalue(h) >= -atol


def ket(*amps) -> np.ndarray:
    v = np.asarray(amps, dtype=float)
    return v


def projector(v) -> np.ndarray:
    v = np.asarray(v)
    return np.outer(v, v.conj())


def perp(v) -> np.ndarray:
    """Orthogonal complement of a real qubit ket, rotated by -90 degrees."""
    v = np.asarray(v, dtype=float)
    if v.shape != (2,):
        raise ValueError("perp is defined for real qubit kets only")
    return np.array([v[1], -v[0]])


def pauli(name: str) -> np.ndarray:
    return {
        "I": np.eye(2),
        "X": np.array([[0.0, 1.0], [1.0, 0.0]]),
        "Y": np.array([[0.0, -1j], [1j, 0.0]]),
        "Z": np.array([[1.0, 0.0], [0.0, -1.0]]),
    }[name.upper()]


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))

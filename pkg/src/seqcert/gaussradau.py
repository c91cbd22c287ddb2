"""Gauss-Radau quadrature on [0, 1] with the right endpoint fixed at 1.

Nodes come from the eigenvalues of the shifted-Legendre Jacobi matrix whose
last diagonal entry is modified so that 1 is an eigenvalue (Golub's
construction). Weights are the squared first components of the eigenvectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded

MAX_NODES = 64


@dataclass(frozen=True)
class RadauQuadrature:
    m: int
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def tau(self) -> np.ndarray:
        """``w_i / (t_i ln 2)`` for every node, the fixed node included."""
        return self.weights / (self.nodes * math.log(2))

    @property
    def interior(self) -> range:
        """Indices of the nodes entering the entropy bound (all but t = 1)."""
        return range(self.m - 1)

    @property
    def c_m(self) -> float:
        return float(np.sum(self.tau[: self.m - 1]))

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


def _legendre01_recurrence(m: int) -> tuple[np.ndarray, np.ndarray]:
    # monic shifted Legendre: alpha_k = 1/2, beta_k = k^2 / (4 (4k^2 - 1))
    alpha = np.full(m, 0.5)
    k = np.arange(1, m, dtype=float)
    beta = k**2 / (4.0 * (4.0 * k**2 - 1.0))
    return alpha, beta


def radau_quadrature(m: int) -> RadauQuadrature:
    if not isinstance(m, (int, np.integer)) or m < 2:
        raise ValueError(f"Radau quadrature needs m >= 2 nodes, got {m!r}")
    if m > MAX_NODES:
        raise ValueError(f"m must be at most {MAX_NODES}, got {m}")
    alpha, beta = _legendre01_recurrence(m)
    # modify alpha_{m-1} so that p_m(1) = 0: solve (J_{m-1} - I) d = beta_{m-1} e_{m-1}
    a = 1.0
    n = m - 1
    offd = np.sqrt(beta[: n - 1])
    ab = np.zeros((3, n))
    ab[0, 1:] = offd
    ab[1, :] = alpha[:n] - a
    ab[2, :-1] = offd
    rhs = np.zeros(n)
    rhs[-1] = beta[n - 1]
    dvec = solve_banded((1, 1), ab, rhs)
    alpha = alpha.copy()
    alpha[-1] = a + dvec[-1]

    nodes, vecs = eigh_tridiagonal(alpha, np.sqrt(beta))
    weights = vecs[0, :] ** 2  # mu_0 = 1 on [0, 1]
    order = np.argsort(nodes)
    nodes, weights = nodes[order], weights[order]
    if abs(nodes[-1] - 1.0) > 1e-12:
        raise ArithmeticError(f"fixed node drifted to {nodes[-1]!r}")
    nodes[-1] = 1.0
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return RadauQuadrature(m=int(m), nodes=nodes, weights=weights)

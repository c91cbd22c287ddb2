"""Closed-form results: deterministic simulation, critical rates, N-party chains."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from .matops import perp, projector
from .quantum import INC, ScenarioParams, build_preparations, complementary_decomposition


@dataclass(frozen=True)
class CriticalRates:
    q_crit_bob: float
    q_crit_charlie: float

    @property
    def window(self) -> tuple[float, float] | None:
        """Bob rates at which both parties can certify, or None."""
        if self.q_crit_charlie <= self.q_crit_bob:
            return (self.q_crit_charlie, self.q_crit_bob)
        return None


@dataclass(frozen=True)
class ChainFeasibility:
    n_parties: int
    x: float
    feasible: bool
    rates: tuple | None = None


def deterministic_povms(params: ScenarioParams, c: float, lam: int) -> np.ndarray:
    """POVM (M_0, M_1, M_inc) of the deterministic strategy ``lam``.

    Strategy 0 never answers 0 and strategy 1 never answers 1; both are built on
    the complementary pure states so they never err against them.
    """
    if not 1.0 <= c <= 2.0:
        raise ValueError(f"c must lie in [1, 2], got {c!r}")
    if lam not in (0, 1):
        raise ValueError("lam must be 0 or 1")
    if params.r == 0:
        phi = (np.array([1.0, 0.0]), np.array([1.0, 0.0]))
    else:
        phi0, phi1, _ = complementary_decomposition(params)
        phi = (phi0, phi1)
    eye = np.eye(2)
    zero = np.zeros((2, 2))
    click = (2 - c) * projector(perp(phi[lam]))
    inc = (2 - c) * projector(phi[lam]) + (c - 1) * eye
    out = [zero, zero, inc]
    out[1 - lam] = click
    return np.array(out)


def deterministic_strategy_rate(params: ScenarioParams, c: float, lam: int | None = None) -> float:
    """Inconclusive rate of the deterministic construction, averaged over ``lam``.

    Both strategies give the same rate by symmetry; passing ``lam`` evaluates
    just that one.
    """
    ens = build_preparations(params)
    lams = (0, 1) if lam is None else (lam,)
    rates = []
    for l in lams:
        M = deterministic_povms(params, c, l)
        rates.append(sum(p * float(np.trace(rho @ M[INC])) for p, rho in zip(ens.priors, ens.states)))
    return float(np.mean(rates))


def critical_rates(params: ScenarioParams) -> CriticalRates:
    x2 = params.x**2
    return CriticalRates((1 + x2) / 2, 2 * params.x / (1 + x2))


def _window_feasible(n: int, x: float) -> bool:
    return x <= ((1 + x * x) / 2) ** n


def _literal_feasible(n: int, x: float, grid: int = 2001):
    """Equal intermediate rates q, last party at the minimal MCM rate.

    Each party i must stay below half of one plus the squared overlap of the
    states it receives, and the last rate must be the largest.
    """
    if x == 0:
        return True, tuple([0.5] * (n - 1) + [0.0])
    for q in np.linspace(1.0, x, grid):
        rates = [q] * (n - 1) + [x / q ** (n - 1)]
        if rates[-1] > 1 + 1e-12:
            continue
        prod = 1.0
        ok = True
        for qi in rates:
            overlap = x / prod  # t_{i-1} s_{i-1}
            if not (overlap - 1e-12 <= qi <= (1 + overlap**2) / 2 + 1e-12):
                ok = False
                break
            prod *= qi
        if ok and rates[-1] >= max(rates[:-1]) - 1e-12:
            return True, tuple(float(r) for r in rates)
    return False, None


def chain_feasible(n: int, x: float, mode: str = "window") -> ChainFeasibility:
    if not 2 <= n <= 12:
        raise ValueError("n must lie in [2, 12]")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if mode == "literal":
        ok, rates = _literal_feasible(n, x)
        return ChainFeasibility(n, x, ok, rates)
    if mode != "window":
        raise ValueError(f"unknown mode {mode!r}")
    if not _window_feasible(n, x):
        return ChainFeasibility(n, x, False)
    q = (1 + x * x) / 2
    rates = tuple([q] * (n - 1) + [x / q ** (n - 1)])
    return ChainFeasibility(n, x, True, rates)


def delta_threshold(n: int, xtol: float = 1e-9) -> float:
    """Largest x of the feasible interval starting at 0.

    ``x = 1`` (identical states) also satisfies the inequality but is isolated
    and carries no randomness, so the search is confined to [0, 1/2].
    """
    if not 2 <= n <= 12:
        raise ValueError("n must lie in [2, 12]")
    return float(bisect(lambda x: ((1 + x * x) / 2) ** n - x, 0.0, 0.5, xtol=xtol))


def delta_curve(n_max: int) -> list[tuple[int, float]]:
    return [(n, delta_threshold(n)) for n in range(2, n_max + 1)]


def min_entropy_bits(p_guess: float) -> float:
    return max(0.0, -math.log2(min(1.0, p_guess)))

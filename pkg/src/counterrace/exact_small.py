"""Exact stationary analysis for N = 3 (closed form) and N = 4 (truncated solve).

For N = 3 the gap chain is a reflected walk on ``{0, 1, ...}``; for N = 4 it is
a walk on the quadrant with four regions of distinct transition laws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

__all__ = [
    "StationaryN3",
    "StationaryN4",
    "ConvergenceError",
    "n3_transitions",
    "solve_n3",
    "n4_transitions",
    "solve_n4",
    "n4_bounds",
]


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class StationaryN3:
    pi0: Fraction
    tail_rate: Fraction
    speed: Fraction

    def pi(self, k: int) -> Fraction:
        if k < 0:
            return Fraction(0)
        if k == 0:
            return self.pi0
        return Fraction(3, 2 ** (k + 2))

    def to_record(self) -> dict:
        return {"pi0": str(self.pi0), "tail_rate": str(self.tail_rate), "speed": str(self.speed)}


def n3_transitions(k: int) -> list[tuple[int, Fraction]]:
    if k == 0:
        return [(1, Fraction(1))]
    return [(k + 1, Fraction(1, 3)), (k - 1, Fraction(2, 3))]


def solve_n3(window: int = 60) -> StationaryN3:
    """``pi(0) = 1/4``, ``pi(k) = 3/2^(k+2)`` and ``V(3) = 3/2``, checked for balance on ``0..window``."""
    pi0 = Fraction(1, 4)
    out = StationaryN3(pi0=pi0, tail_rate=Fraction(1, 2), speed=2 * pi0 + Fraction(4, 3) * (1 - pi0))
    inflow = {k: Fraction(0) for k in range(window + 1)}
    for j in range(window + 2):
        for k, p in n3_transitions(j):
            if k <= window:
                inflow[k] += out.pi(j) * p
    bad = [k for k in range(window + 1) if inflow[k] != out.pi(k)]
    if bad:
        raise AssertionError(f"closed form fails balance at {bad[:5]}")
    if sum(out.pi(k) for k in range(window + 1)) + Fraction(3, 2 ** (window + 2)) != 1:
        raise AssertionError("closed form does not sum to one")
    return out


def n4_transitions(k: int, l: int) -> list[tuple[tuple[int, int], Fraction]]:
    """Transition law of the N = 4 gap chain from ``(k, l)``."""
    F = Fraction
    if k == 0 and l == 0:
        return [((1, 0), F(1))]
    if l == 0:
        return [((k + 1, 0), F(1, 6)), ((k - 1, 0), F(1, 6)), ((k - 1, 1), F(2, 3))]
    if k == 0:
        return [((0, l - 1), F(1, 2)), ((1, l), F(1, 2))]
    return [((k + 1, l), F(1, 6)), ((k, l - 1), F(1, 2)), ((k - 1, l + 1), F(1, 3))]


@dataclass
class StationaryN4:
    grid: np.ndarray  # grid[k, l] for 0 <= k, l <= L
    L: int
    Pi: tuple[float, float, float, float]
    speed: float
    residual: float
    iterations: int = 0

    @property
    def pi0(self) -> float:
        return self.Pi[0]

    def balance_residuals(self) -> tuple[float, float]:
        """Residuals of the horizontal and vertical flow-balance identities."""
        p0, p1, p2, p3 = self.Pi
        return (p0 - 2 / 3 * p1 + p2 / 2 - p3 / 6, 2 / 3 * p1 - p2 / 2 - p3 / 6)

    def to_record(self) -> dict:
        return {
            "pi0": self.Pi[0],
            "speed": self.speed,
            "L": self.L,
            "residual": self.residual,
            "Pi": list(self.Pi),
        }


def _n4_matrix(L: int) -> sp.csr_matrix:
    size = (L + 1) ** 2
    rows, cols, vals = [], [], []
    for k in range(L + 1):
        for l in range(L + 1):
            src = k * (L + 1) + l
            for (k2, l2), p in n4_transitions(k, l):
                # leaving the box: the mass stays on the cell it tried to exit from
                dst = k2 * (L + 1) + l2 if k2 <= L and l2 <= L else src
                rows.append(src)
                cols.append(dst)
                vals.append(float(p))
    return sp.csr_matrix((vals, (rows, cols)), shape=(size, size))


def solve_n4(L: int = 200, tol: float = 1e-12, relaxation: float = 0.5, max_iter: int = 10_000_000) -> StationaryN4:
    """Stationary law of the N = 4 gap chain on the box ``[0, L]^2`` by relaxed power iteration.

    Iterates ``pi <- (1 - w) pi + w pi P`` until the total-variation change per
    sweep drops below ``tol``.
    """
    if L < 10:
        raise ValueError("L must be at least 10")
    if tol <= 0:
        raise ValueError("tol must be positive")
    P = _n4_matrix(L)
    PT = P.T.tocsr()
    k = np.arange(L + 1)
    # start from the product of geometric tails, close to the answer
    pi = np.outer(0.5 ** k, 0.5 ** k).ravel()
    pi /= pi.sum()
    w = relaxation
    change = math.inf
    it = 0
    while change >= tol:
        if it >= max_iter:
            raise ConvergenceError("power iteration hit the iteration cap", change)
        new = (1 - w) * pi + w * (PT @ pi)
        new /= new.sum()
        change = 0.5 * np.abs(new - pi).sum()
        pi = new
        it += 1
    residual = float(np.abs(PT @ pi - pi).sum())
    grid = pi.reshape(L + 1, L + 1)
    p0 = float(grid[0, 0])
    p1 = float(grid[1:, 0].sum())
    p2 = float(grid[0, 1:].sum())
    p3 = float(grid[1:, 1:].sum())
    speed = 1 + p0 + p1 / 3 + p2 / 2 + p3 / 6
    return StationaryN4(grid=grid, L=L, Pi=(p0, p1, p2, p3), speed=speed, residual=residual, iterations=it)


def n4_bounds() -> tuple[Fraction, Fraction]:
    """``(26/19, 10/7)``; the upper end is ``10/7 - (2/7) Pi_0`` at ``Pi_0 = 0``."""
    lower, upper = Fraction(26, 19), Fraction(10, 7)
    speed = lambda p0: Fraction(10, 7) - Fraction(2, 7) * p0  # noqa: E731
    if speed(0) != upper or speed(1) != Fraction(8, 7):
        raise AssertionError("speed identity is inconsistent")
    if not Fraction(8, 7) <= lower <= upper:
        raise AssertionError("lower bound must improve on 8/7")
    return lower, upper

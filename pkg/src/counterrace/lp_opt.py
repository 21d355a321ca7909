"""Optimal linear test functions by linear programming.

For a test function ``h`` on the gap indices ``1..N-2`` the stationary speed obeys

    V(N) <= max over alpha of  V_alpha - sum_k h(k) E[dX_k | alpha],

so the best such bound solves ``min v`` subject to
``v + sum_k h(k) E_k(alpha) >= V_alpha`` for every configuration.  We solve the
dual (one column per configuration, ``N - 1`` rows) with a revised simplex and
read ``(h, v)`` off the simplex multipliers.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .config_algebra import Configuration, expected_increments, speed_in_configuration

__all__ = [
    "ENUMERATION_CAP",
    "UnsupportedSizeError",
    "LpProblem",
    "LpSolution",
    "ParabolaFit",
    "enumerate_configurations",
    "build_lp",
    "solve_lp",
    "objective_at",
    "fit_parabola",
    "table3_csv",
]

ENUMERATION_CAP = 20
EXACT_LIMIT = 12


class UnsupportedSizeError(ValueError):
    pass


def enumerate_configurations(n: int) -> list[Configuration]:
    """All compositions of ``n`` with first part at least 2 (there are ``2^(n-2)``)."""
    if n < 4:
        raise ValueError("configurations need N >= 4")
    if n > ENUMERATION_CAP:
        raise UnsupportedSizeError(
            f"full enumeration is capped at N={ENUMERATION_CAP}; use config_algebra.worst_case_reduce for larger N"
        )
    out = []
    # a composition of n - 1 (first part alpha_1 - 1) is a subset of the n - 2 cut points
    for cuts in itertools.product((0, 1), repeat=n - 2):
        parts, run = [], 1
        for bit in cuts:
            if bit:
                parts.append(run)
                run = 1
            else:
                run += 1
        parts.append(run)
        parts[0] += 1
        out.append(Configuration(tuple(parts)))
    out.sort(key=lambda c: c.alpha, reverse=True)
    return out


@dataclass
class LpProblem:
    n: int
    configurations: list[Configuration]
    # constraints[j] = (coefficients of (h(1), ..., h(N-2), v), rhs)
    constraints: list[tuple[tuple[Fraction, ...], Fraction]]

    @property
    def n_vars(self) -> int:
        return self.n - 1

    def slack(self, h, v) -> list:
        return [sum(a * x for a, x in zip(coef, (*h, v))) - rhs for coef, rhs in self.constraints]


@dataclass
class LpSolution:
    n: int
    status: str
    bound: float
    h_values: list[float]
    active_set: list[int]
    exact_bound: Fraction | None = None
    exact_h: list[Fraction] | None = None
    violations: int = 0
    method: str = "exact"
    iterations: int = 0
    weights: dict[int, Fraction] = field(default_factory=dict)  # dual weights on the configurations

    def to_record(self) -> dict:
        return {
            "n": self.n,
            "status": self.status,
            "bound": self.bound,
            "exact_bound": None if self.exact_bound is None else str(self.exact_bound),
            "h": self.h_values,
            "active_set": self.active_set,
            "violations": self.violations,
            "method": self.method,
            "iterations": self.iterations,
        }


def build_lp(n: int, configurations: list[Configuration] | None = None) -> LpProblem:
    configs = enumerate_configurations(n) if configurations is None else list(configurations)
    cons = []
    for c in configs:
        if c.n != n:
            raise ValueError(f"{c} is not a configuration of N={n}")
        inc = expected_increments(c)
        coef = tuple(inc[k] for k in range(1, n - 1)) + (Fraction(1),)
        cons.append((coef, speed_in_configuration(c)))
    return LpProblem(n, configs, cons)


def objective_at(p: LpProblem, h) -> Fraction:
    """Smallest ``v`` making ``h`` feasible, i.e. ``max_alpha V_alpha - sum h E``."""
    return max(rhs - sum(a * x for a, x in zip(coef[:-1], h)) for coef, rhs in p.constraints)


# --- simplex on the dual: max c.y, A y = b, y >= 0 --------------------------------


def _dual_data(p: LpProblem):
    m = p.n_vars
    cols = [list(coef) for coef, _ in p.constraints]
    cost = [rhs for _, rhs in p.constraints]
    b = [Fraction(0)] * (m - 1) + [Fraction(1)]
    return cols, cost, b


def _inverse(M: list[list[Fraction]]) -> list[list[Fraction]]:
    m = len(M)
    aug = [row[:] + [Fraction(int(i == j)) for j in range(m)] for i, row in enumerate(M)]
    for c in range(m):
        piv = next((r for r in range(c, m) if aug[r][c] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular basis")
        aug[c], aug[piv] = aug[piv], aug[c]
        inv = 1 / aug[c][c]
        aug[c] = [x * inv for x in aug[c]]
        for r in range(m):
            if r != c and aug[r][c] != 0:
                f = aug[r][c]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[c])]
    return [row[m:] for row in aug]


class _Exact:
    """Bland-rule revised simplex on rationals; columns ``n..n+m-1`` are artificials."""

    def __init__(self, cols, b):
        self.m = len(b)
        self.n = len(cols)
        self.cols = cols + [[Fraction(int(i == j)) for i in range(self.m)] for j in range(self.m)]
        self.b = b
        self.iterations = 0

    def column(self, j):
        return self.cols[j]

    def set_basis(self, basis):
        self.basis = list(basis)
        B = [[self.cols[j][i] for j in self.basis] for i in range(self.m)]
        self.Binv = _inverse(B)
        self.x = [sum(r * bb for r, bb in zip(row, self.b)) for row in self.Binv]

    def duals(self, cost):
        cb = [cost[j] for j in self.basis]
        return [sum(cb[i] * self.Binv[i][k] for i in range(self.m)) for k in range(self.m)]

    def run(self, cost, allowed):
        while True:
            pi = self.duals(cost)
            enter = None
            for j in allowed:
                if j in self.basis:
                    continue
                col = self.cols[j]
                if cost[j] - sum(p * a for p, a in zip(pi, col) if a) > 0:
                    enter = j
                    break
            if enter is None:
                return "optimal"
            col = self.cols[enter]
            u = [sum(r[k] * col[k] for k in range(self.m) if col[k]) for r in self.Binv]
            best = None
            for i in range(self.m):
                if u[i] > 0:
                    key = (self.x[i] / u[i], self.basis[i])
                    if best is None or key < best[0]:
                        best = (key, i)
            if best is None:
                return "unbounded"
            self._pivot(best[1], enter, u)

    def _pivot(self, r, enter, u):
        ur = u[r]
        rowr = [v / ur for v in self.Binv[r]]
        xr = self.x[r] / ur
        for i in range(self.m):
            if i != r and u[i] != 0:
                f = u[i]
                self.Binv[i] = [a - f * c for a, c in zip(self.Binv[i], rowr)]
                self.x[i] -= f * xr
        self.Binv[r] = rowr
        self.x[r] = xr
        self.basis[r] = enter
        self.iterations += 1

    def drive_out_artificials(self):
        for r in range(self.m):
            if self.basis[r] < self.n:
                continue
            for j in range(self.n):
                if j in self.basis:
                    continue
                col = self.cols[j]
                val = sum(self.Binv[r][k] * col[k] for k in range(self.m) if col[k])
                if val != 0:
                    u = [sum(row[k] * col[k] for k in range(self.m) if col[k]) for row in self.Binv]
                    self._pivot(r, j, u)
                    break


def _float_basis(cols, cost, b, tol=1e-11, max_iter=100_000):
    """Two-phase Bland simplex in floating point; returns the final basis or None."""
    A = np.array(cols, dtype=float).T
    m, n = A.shape
    A = np.hstack([A, np.eye(m)])
    bb = np.array(b, dtype=float)
    basis = list(range(n, n + m))
    Binv = np.eye(m)
    x = bb.copy()
    its = 0

    def phase(c, allowed_mask):
        nonlocal Binv, x, its
        while its < max_iter:
            if its % 50 == 0:
                Binv = np.linalg.inv(A[:, basis])
                x = Binv @ bb
            pi = c[basis] @ Binv
            d = c - pi @ A
            d[basis] = 0.0
            d[~allowed_mask] = 0.0
            cand = np.flatnonzero(d > tol)
            if cand.size == 0:
                return True
            j = int(cand[0])
            u = Binv @ A[:, j]
            pos = u > tol
            if not pos.any():
                return False
            ratios = np.full(m, np.inf)
            ratios[pos] = np.maximum(x[pos], 0.0) / u[pos]
            rmin = ratios.min()
            ties = np.flatnonzero(ratios <= rmin + 1e-13)
            r = min(ties, key=lambda i: basis[i])
            Binv[r] /= u[r]
            for i in range(m):
                if i != r and u[i] != 0.0:
                    Binv[i] -= u[i] * Binv[r]
            x = Binv @ bb
            basis[r] = j
            its += 1
        return False

    c1 = np.zeros(n + m)
    c1[n:] = -1.0
    if not phase(c1, np.ones(n + m, dtype=bool)):
        return None, its
    mask = np.zeros(n + m, dtype=bool)
    mask[:n] = True
    c2 = np.concatenate([np.array([float(c) for c in cost]), np.zeros(m)])
    if not phase(c2, mask):
        return None, its
    return basis, its


def solve_lp(p: LpProblem, exact: bool | None = None) -> LpSolution:
    """Optimal ``(h, v)``; always finishes with an exact rational certificate.

    ``exact`` defaults to ``N <= 12``.  Otherwise a floating-point simplex finds a
    basis which is then checked, and if needed repaired, in exact arithmetic.
    """
    cols, cost, b = _dual_data(p)
    n_cols = len(cols)
    solver = _Exact(cols, b)
    exact = p.n <= EXACT_LIMIT if exact is None else exact
    method = "exact"
    status = None
    warm = None
    if not exact:
        method = "float+exact-verify"
        warm, _ = _float_basis(cols, cost, b)
    full_cost = list(cost) + [Fraction(0)] * solver.m
    if warm is not None:
        try:
            solver.set_basis(warm)
            if min(solver.x) < 0:
                warm = None
        except ZeroDivisionError:
            warm = None
    if warm is None:
        solver.set_basis(range(n_cols, n_cols + solver.m))
        ph1 = [Fraction(0)] * n_cols + [Fraction(-1)] * solver.m
        solver.run(ph1, range(n_cols + solver.m))
        infeas = sum(x for x, j in zip(solver.x, solver.basis) if j >= n_cols)
        if infeas != 0:
            # no dual feasible point: v can be pushed down without limit
            return LpSolution(p.n, "unbounded", math.nan, [], [], method=method, iterations=solver.iterations)
        solver.drive_out_artificials()
    status = solver.run(full_cost, range(n_cols))
    if status != "optimal":
        # unbounded dual objective means the constraints on (h, v) are contradictory
        return LpSolution(p.n, "infeasible", math.nan, [], [], method=method, iterations=solver.iterations)
    pi = solver.duals(full_cost)
    h, v = pi[:-1], pi[-1]
    slacks = p.slack(h, v)
    violations = sum(1 for s in slacks if s < 0)
    active = [j for j, s in enumerate(slacks) if s == 0]
    weights = {j: x for j, x in zip(solver.basis, solver.x) if j < n_cols and x != 0}
    return LpSolution(
        n=p.n,
        status="optimal",
        bound=float(v),
        h_values=[float(x) for x in h],
        active_set=active,
        exact_bound=v,
        exact_h=list(h),
        violations=violations,
        method=method,
        iterations=solver.iterations,
        weights=weights,
    )


@dataclass(frozen=True)
class ParabolaFit:
    A: float
    B: float
    C: float
    vertex: tuple[float, float]
    rms_residual: float
    note: str = ""

    def __call__(self, k):
        return self.A * k * k + self.B * k + self.C

    def to_record(self) -> dict:
        return {"A": self.A, "B": self.B, "C": self.C, "vertex": list(self.vertex), "rms_residual": self.rms_residual, "note": self.note}


def fit_parabola(h_values, ks=None) -> ParabolaFit:
    """Least-squares ``A k^2 + B k + C`` through ``h_values`` (indexed ``1, 2, ...`` unless ``ks`` given)."""
    y = np.asarray([float(v) for v in h_values])
    if y.size < 3:
        raise ValueError("need at least 3 values to fit a parabola")
    k = np.arange(1, y.size + 1, dtype=float) if ks is None else np.asarray(ks, dtype=float)
    if np.ptp(y) == 0:
        return ParabolaFit(0.0, 0.0, float(y[0]), (math.nan, float(y[0])), 0.0, note="constant input, zero curvature")
    A, B, C = np.polyfit(k, y, 2)
    rms = float(np.sqrt(np.mean((np.polyval([A, B, C], k) - y) ** 2)))
    if A != 0:
        xv = -B / (2 * A)
        vertex = (float(xv), float(np.polyval([A, B, C], xv)))
    else:
        vertex = (math.nan, math.nan)
    return ParabolaFit(float(A), float(B), float(C), vertex, rms)


def table3_csv(solutions: list[LpSolution]) -> str:
    """Rows ``N, h(1), ..., h(N-2), bound``; the bound sits in the column after the last ``h``."""
    width = max(len(s.h_values) for s in solutions) + 1
    head = ["N"] + [f"h({k})" for k in range(1, width + 1)]
    lines = [",".join(head)]
    for s in solutions:
        vals = [f"{x:.6f}" for x in s.h_values] + [f"{s.bound:.6f}"]
        vals += [""] * (width - len(vals))
        lines.append(",".join([str(s.n)] + vals))
    return "\n".join(lines) + "\n"

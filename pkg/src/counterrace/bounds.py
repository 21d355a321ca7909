"""Upper and lower bounds on the speed V(N).

Finite-N upper bounds come from the quadratic test function
``f(x) = (x+1)/2 - (x^2-1)/(2(N-2))`` evaluated on the candidate worst
configurations; the asymptotic constants are ``34/27`` (upper) and
``1 + sqrt(3)/27`` (lower).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .config_algebra import Configuration, TestFunction, drift_functional, worst_case_reduce

__all__ = [
    "BoundReport",
    "upper_test_function",
    "lower_test_function",
    "s_value",
    "finite_upper_bound",
    "remark_upper_bound",
    "appendix_a_table",
    "asymptotic_s",
    "asymptotic_upper",
    "lower_scenario_singletons",
    "singletons_partial_sum",
    "lower_scenario_large_level",
    "large_level_dy",
    "lower_envelope",
    "lower_bound_optimize",
    "LOWER_B_STAR",
    "LOWER_BOUND",
    "UPPER_BOUND",
]

UPPER_BOUND = Fraction(34, 27)
LOWER_B_STAR = 1 / 3 + math.sqrt(3) / 18
LOWER_BOUND = 1 + math.sqrt(3) / 27


@dataclass
class BoundReport:
    n: int | str
    direction: str
    value: Fraction | float
    witness: object = None
    method: str = ""
    extra: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        value = self.value
        rec = {
            "n": self.n,
            "direction": self.direction,
            "value": float(value),
            "exact": str(value) if isinstance(value, Fraction) else None,
            "witness": str(self.witness) if isinstance(self.witness, Configuration) else self.witness,
            "method": self.method,
        }
        rec.update(self.extra)
        return rec


def upper_test_function(n: int) -> TestFunction:
    if n < 4:
        raise ValueError("the quadratic upper test function needs N >= 4")
    return TestFunction.quadratic(Fraction(-1, 2 * (n - 2)), Fraction(1, 2), n)


def lower_test_function(n: int, B=LOWER_B_STAR) -> TestFunction:
    if n < 4:
        raise ValueError("the quadratic lower test function needs N >= 4")
    A = Fraction(-1, 2 * (n - 2)) if isinstance(B, Fraction) else -1.0 / (2 * (n - 2))
    return TestFunction.quadratic(A, B, n)


def s_value(c: Configuration, h: TestFunction | None = None) -> Fraction:
    """``S(alpha)``: the drift functional at ``v = 1`` (default ``h`` is the upper test function)."""
    h = upper_test_function(c.n) if h is None else h
    return drift_functional(c, h, 1)


def finite_upper_bound(n: int, candidates=None) -> BoundReport:
    """``1 + max(-S(alpha))`` over the candidate worst configurations.

    Ties are broken by the lexicographically smallest configuration.
    """
    if n < 5:
        raise ValueError("finite upper bounds are given for N >= 5; see exact_small for N = 3, 4")
    h = upper_test_function(n)
    cands = worst_case_reduce(n) if candidates is None else candidates
    scored = sorted(((-s_value(c, h), c.alpha) for c in cands), key=lambda t: (-t[0], t[1]))
    worst, alpha = scored[0]
    return BoundReport(n, "upper", 1 + worst, Configuration(alpha), "candidate-list")


def remark_upper_bound(n: int) -> Fraction:
    """Closed-form finite-N upper bound by residue of N mod 3."""
    if n < 5:
        raise ValueError("closed forms hold for N >= 5")
    r = n % 3
    if r == 0:
        return 1 + Fraction(n * (7 * n - 9), 27 * (n * n - 3 * n + 2))
    if r == 1:
        return 1 + Fraction(7 * n * n - 2 * n - 5, 27 * n * (n - 2))
    return 1 + Fraction(7 * n**3 - 9 * n * n - 3 * n + 13, 27 * n * (n * n - 3 * n + 2))


def appendix_a_table(n: int) -> dict[str, tuple[Configuration, Fraction]]:
    """Closed-form ``S(alpha)`` for the nine candidate cases, keyed ``i`` .. ``ix``.

    Cases whose configuration does not exist at this ``N`` (a top level of one
    counter) are omitted.
    """
    if n < 5:
        raise ValueError("closed forms hold for N >= 5")
    F = Fraction
    q = n * n - 3 * n + 2
    rows: dict[str, tuple[tuple[int, ...], Fraction]] = {
        "i": ((n,), F(0)),
        "ii": ((n - 1, 1), F(-(n - 1), n * (n - 2))),
        "iii": ((n - 2, 2), F(-2, n)),
    }
    if n % 2 == 0:
        h = n // 2
        rows["iv"] = ((h, h), F(-n, 4 * (n - 2)))
        rows["v"] = ((h, h - 1, 1), F(-(n**3) + n * n + 2 * n - 4, 4 * n * q))
        rows["vi"] = ((h - 1, h - 1, 2), F(-(n * n + n + 2), 4 * n * (n - 1)))
    else:
        h = (n - 1) // 2
        rows["iv"] = ((h, h + 1), F(-(n * n - 1), 4 * n * (n - 2)))
        # odd N: the level sizes below sum to N; S matches case (iv)
        rows["v"] = ((h, h, 1), F(-(n * n - 1), 4 * n * (n - 2)))
        rows["vi"] = ((h, h - 1, 2), F(-(n * n - 1), 4 * n * (n - 2)))
    r = n % 3
    t = n // 3
    if r == 0:
        rows["vii"] = ((t, t, t), F(-n * (7 * n - 9), 27 * q))
        rows["viii"] = ((t, t, t - 1, 1), F(-(7 * n**3 - 12 * n * n + 27), 27 * n * q))
        rows["ix"] = ((t, t - 1, t - 1, 2), F(-(7 * n**3 - 15 * n * n + 27 * n - 27), 27 * n * q))
    elif r == 1:
        rows["vii"] = ((t + 1, t, t), F(-7 * n * n + 2 * n + 5, 27 * n * (n - 2)))
        rows["viii"] = ((t, t, t, 1), F(-7 * n * n + 5 * n + 2, 27 * n * (n - 2)))
        rows["ix"] = ((t, t, t - 1, 2), F(-(7 * n * n - 8 * n + 19), 27 * n * (n - 2)))
    else:
        rows["vii"] = ((t + 1, t + 1, t), F(-7 * n**3 + 9 * n * n + 3 * n - 13, 27 * n * q))
        rows["viii"] = ((t + 1, t, t, 1), F(-(7 * n**3 - 12 * n * n + 19), 27 * n * q))
        rows["ix"] = ((t, t, t, 2), F(-(7 * n * n - n + 28), 27 * n * (n - 1)))
    return {
        tag: (Configuration(alpha), val)
        for tag, (alpha, val) in rows.items()
        if alpha[0] >= 2 and min(alpha) >= 1
    }


def asymptotic_s(k: int) -> Fraction:
    """Limit of ``S`` for ``k`` equal large levels followed by a singleton (B = 1/2)."""
    return -2 * Fraction(k * k - 1, 3 * k * k) + Fraction(k + 1, 2 * k) - Fraction(1, k)


def asymptotic_upper(k_max: int = 10) -> BoundReport:
    values = {k: asymptotic_s(k) for k in range(1, k_max + 1)}
    k_star = min(values, key=lambda k: (values[k], k))
    return BoundReport(
        "asymptotic",
        "upper",
        1 - values[k_star],
        k_star,
        "asymptotic-levels",
        {"S": {k: str(v) for k, v in values.items()}},
    )


# --- lower bound -----------------------------------------------------------


def lower_scenario_singletons(B: float) -> float:
    """Asymptotic constraint ``v_g <= 2/3 + B`` from the all-singletons configuration."""
    if not 0 < B < 1:
        raise ValueError("B must lie in (0, 1)")
    return Fraction(2, 3) + B if isinstance(B, Fraction) else 2.0 / 3.0 + B


def singletons_partial_sum(n: int, B=Fraction(1, 2)) -> Fraction:
    """``-(2/(N(N-1))) * sum_{k=1}^{N-2} g(k)``; tends to ``1/3 - B``."""
    if n < 3:
        raise ValueError("N must be at least 3")
    B = Fraction(B)
    # closed-form power sums keep this O(1) in N
    m = n - 2
    s1 = Fraction(m * (m + 1), 2)
    s2 = Fraction(m * (m + 1) * (2 * m + 1), 6)
    total = B * (s1 + m) - (s2 - m) / (2 * (n - 2))
    return -2 * total / (n * (n - 1))


def _g(B, y, z):
    return (
        2 / 3
        + B
        + z * z * (1 - 2 * B)
        + (2 / 3) * y**3
        - B * y * y
        - 2 * B * z * y
        + 2 * z * y * y
        + 2 * z * z * y
        + (y + z) ** 3 / 3
        - B * (y + z) ** 2
    )


def lower_scenario_large_level(B: float, y: float, z: float) -> float:
    """``G(B, y, z)`` for one large level of ``zN`` counters below ``yN`` singletons."""
    if not 3 / 7 - 1e-15 <= B <= 0.5 + 1e-15:
        raise ValueError("B must lie in [3/7, 1/2]")
    if y < 0 or z < 1 - B - 1e-15 or y + z > 1 + 1e-15:
        raise ValueError("need y >= 0, z >= 1 - B and y + z <= 1")
    return _g(B, y, z)


def large_level_dy(B: float, y: float, z: float) -> float:
    """``dG/dy = 3y^2 + y(6z - 4B) + 3z^2 - 4Bz``."""
    return 3 * y * y + y * (6 * z - 4 * B) + 3 * z * z - 4 * B * z


def _golden(fn, lo: float, hi: float, tol: float = 1e-12, maximize: bool = False):
    sign = -1.0 if maximize else 1.0
    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - g * (b - a)
    d = a + g * (b - a)
    fc, fd = sign * fn(c), sign * fn(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = sign * fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = sign * fn(d)
    x = (a + b) / 2
    return x, fn(x)


def _large_level_min(B: float, resolution: int, refine: bool = True) -> tuple[float, float, float]:
    """``min G(B, y, z)`` over ``y >= 0``, ``z >= 1 - B``, ``y + z <= 1``: grid, then nested golden section."""
    ys = np.linspace(0.0, B, resolution + 1)
    zs = np.linspace(1 - B, 1.0, resolution + 1)
    Y, Z = np.meshgrid(ys, zs, indexing="ij")
    vals = np.where(Y + Z <= 1 + 1e-15, _g(B, Y, Z), np.inf)
    i, j = np.unravel_index(np.argmin(vals), vals.shape)
    if not refine:
        return float(ys[i]), float(zs[j]), float(vals[i, j])
    dy = ys[1] - ys[0]
    dz = zs[1] - zs[0]

    def over_z(y):
        a = max(1 - B, zs[j] - dz)
        b = min(1 - y, zs[j] + dz)
        if b <= a:
            return a, _g(B, y, a)
        return _golden(lambda z: _g(B, y, z), a, b, 1e-13)

    y_lo, y_hi = max(0.0, ys[i] - dy), min(B, ys[i] + dy)
    y_best, _ = _golden(lambda y: over_z(y)[1], y_lo, y_hi, 1e-13)
    z_best, val = over_z(y_best)
    z0, val0 = over_z(0.0)
    if y_lo == 0.0 and val0 <= val:
        return 0.0, z0, val0
    return y_best, z_best, val


def lower_envelope(B: float, resolution: int = 200, refine: bool = True) -> float:
    """Tightest lower-bound constant certified at ``B``: the minimum over both scenarios."""
    return min(lower_scenario_singletons(B), _large_level_min(B, resolution, refine)[2])


def lower_bound_optimize(grid_resolution: int = 1000) -> BoundReport:
    """Maximise the scenario envelope over ``B`` by grid search and golden-section refinement."""
    if grid_resolution < 1000:
        raise ValueError("grid_resolution must be at least 1000")
    lo, hi = 3 / 7, 0.5
    res_inner = 120
    Bs = np.linspace(lo, hi, grid_resolution + 1)
    env = np.array([lower_envelope(b, res_inner, refine=False) for b in Bs])
    i = int(env.argmax())
    # the coarse inner minimum is biased by the (y, z) grid spacing; bracket generously
    w = max(2, grid_resolution // 20)
    a, b = Bs[max(i - w, 0)], Bs[min(i + w, grid_resolution)]
    B_num, val = _golden(lambda t: lower_envelope(t, res_inner), a, b, 1e-11, maximize=True)
    y, z, _ = _large_level_min(B_num, res_inner)
    analytic = 2 / 3 + LOWER_B_STAR - (4 / 3) * (3 * LOWER_B_STAR - 1) ** 3
    return BoundReport(
        "asymptotic",
        "lower",
        val,
        {"B": float(B_num), "y": float(y), "z": float(z)},
        "scenario-envelope",
        {
            "B_star_analytic": LOWER_B_STAR,
            "bound_analytic": LOWER_BOUND,
            "envelope_at_B_star": analytic,
            "z_star_analytic": 2 * (3 * LOWER_B_STAR - 1),
        },
    )

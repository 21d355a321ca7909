"""Configurations, exact expected increments and the drift functional.

A configuration ``alpha = (a_1, ..., a_M)`` lists how many counters sit on each
occupied level, top level first. With ``l_i = a_1 + ... + a_i`` the counters of
level ``i+1`` own the gap coordinates ``l_i - 1 .. l_{i+1} - 2``. Everything in
this module is exact rational arithmetic.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, Mapping, Sequence

__all__ = [
    "Configuration",
    "TestFunction",
    "configuration_of",
    "speed_in_configuration",
    "level_increments",
    "expected_increments",
    "e_star",
    "level_contribution",
    "drift_functional",
    "drift_functional_direct",
    "q_n",
    "q_n_direct",
    "d_k",
    "move_counters",
    "worst_case_reduce",
    "reduce_configuration",
    "table1_csv",
    "case_number",
]


def _frac(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


@dataclass(frozen=True)
class Configuration:
    alpha: tuple[int, ...]

    def __post_init__(self):
        alpha = tuple(int(a) for a in self.alpha)
        if not alpha:
            raise ValueError("configuration needs at least one level")
        if alpha[0] < 2:
            raise ValueError(f"top level must hold >= 2 counters: {alpha}")
        if any(a < 1 for a in alpha):
            raise ValueError(f"levels must be non-empty: {alpha}")
        object.__setattr__(self, "alpha", alpha)

    @property
    def n(self) -> int:
        return sum(self.alpha)

    @property
    def m(self) -> int:
        return len(self.alpha)

    @property
    def cumulative(self) -> tuple[int, ...]:
        """``(l_0, l_1, ..., l_M)`` with ``l_0 = 0`` and ``l_M = N``."""
        out = [0]
        for a in self.alpha:
            out.append(out[-1] + a)
        return tuple(out)

    def representative_gaps(self, gap: int = 1) -> tuple[int, ...]:
        """A gap vector in this configuration, with every between-level gap set to ``gap``."""
        gaps = []
        for i, a in enumerate(self.alpha):
            if i > 0:
                gaps.append(gap)
            gaps.extend([0] * (a - 1))
        return tuple(gaps[1:])

    def __iter__(self):
        return iter(self.alpha)

    def __len__(self):
        return len(self.alpha)

    def __str__(self):
        return "(" + ",".join(map(str, self.alpha)) + ")"


class TestFunction:
    """A test function ``h`` on the integers ``-1..N`` with ``h(-1) = 0``.

    Values may be exact rationals or floats; the quadratic family
    ``A(x^2-1) + B(x+1)`` is built with :meth:`quadratic`.
    """

    __test__ = False  # not a pytest class

    def __init__(self, values: Mapping[int, object] | Sequence, n: int, A=None, B=None):
        self.n = n
        if isinstance(values, Mapping):
            vals = dict(values)
        else:
            vals = {k - 1: v for k, v in enumerate(values)}
        vals.setdefault(-1, 0)
        if vals[-1] != 0:
            raise ValueError("test functions must vanish at -1")
        self.values = vals
        self.A = A
        self.B = B

    @classmethod
    def quadratic(cls, A, B, n: int) -> "TestFunction":
        vals = {k: A * (k * k - 1) + B * (k + 1) for k in range(-1, n + 1)}
        return cls(vals, n, A=A, B=B)

    @classmethod
    def from_callable(cls, fn: Callable[[int], object], n: int) -> "TestFunction":
        return cls({k: fn(k) for k in range(-1, n + 1)}, n)

    def __call__(self, k: int):
        try:
            return self.values[k]
        except KeyError:
            raise KeyError(f"test function undefined at {k} (domain -1..{self.n})") from None

    def delta(self, k: int):
        return self(k + 1) - self(k)

    def __repr__(self):
        if self.A is not None:
            return f"TestFunction.quadratic(A={self.A}, B={self.B}, n={self.n})"
        return f"TestFunction(n={self.n})"


def configuration_of(x: Sequence[int], n: int | None = None) -> Configuration:
    """Group the counters of gap state ``x`` into levels of equal height."""
    gaps = tuple(getattr(x, "gaps", x))
    if n is not None and len(gaps) != n - 2:
        raise ValueError(f"gap vector of length {len(gaps)} does not match N={n}")
    alpha = [2]
    for g in gaps:
        if g < 0:
            raise ValueError("gaps must be non-negative")
        if g == 0:
            alpha[-1] += 1
        else:
            alpha.append(1)
    return Configuration(tuple(alpha))


def speed_in_configuration(c: Configuration) -> Fraction:
    """``V_alpha(N) = 1 + sum a_i(a_i-1) / (N(N-1))``."""
    n = c.n
    return 1 + Fraction(sum(a * (a - 1) for a in c.alpha), n * (n - 1))


def case_number(alpha_i: int, alpha_ip1: int) -> int:
    """Row 1..9 of the increment table for the level pair (level i, level i+1)."""
    row = 0 if alpha_ip1 >= 3 else (1 if alpha_ip1 == 2 else 2)
    col = 0 if alpha_i >= 3 else (1 if alpha_i == 2 else 2)
    return 3 * row + col + 1


def level_increments(l_i: int, alpha_i: int, alpha_ip1: int, n: int) -> dict[int, Fraction]:
    """Expected increments at positions ``l_i-1, l_i, l_i+1`` owned by level ``i+1`` (i >= 1).

    ``alpha_i`` is the size of the level just above; ``l_{i-1} = l_i - alpha_i``.
    """
    pairs = math.comb(n, 2)
    a = alpha_ip1
    l_prev = l_i - alpha_i
    # correction at the top of the gap: the level above moves as a pair (2) or a singleton moves up (1)
    above = 1 if alpha_i == 2 else (l_prev if alpha_i == 1 else 0)
    if a >= 3:
        out = {
            l_i - 1: Fraction(-(l_i * a + math.comb(a, 2)) + above, pairs),
            l_i: Fraction(l_i * a, pairs),
            l_i + 1: Fraction(math.comb(a, 2), pairs),
        }
    elif a == 2:
        out = {
            l_i - 1: Fraction(-(2 * l_i + 1) + above, pairs),
            l_i: Fraction(2 * l_i, pairs),
        }
    else:
        out = {l_i - 1: Fraction(-l_i + above, pairs)}
    return out


def expected_increments(c: Configuration) -> dict[int, Fraction]:
    """Exact ``E[X_k(1) - x_k]`` for every gap coordinate ``k = 1..N-2``."""
    n = c.n
    out = {k: Fraction(0) for k in range(1, n - 1)}
    a1 = c.alpha[0]
    if a1 >= 3:
        out[1] += Fraction(math.comb(a1, 2), math.comb(n, 2))
    ls = c.cumulative
    for i in range(1, c.m):
        for pos, val in level_increments(ls[i], c.alpha[i - 1], c.alpha[i], n).items():
            if not 1 <= pos <= n - 2:
                if val != 0:
                    raise AssertionError(f"non-zero increment outside the gap range at {pos}")
                continue
            out[pos] += val
    return out


def e_star(l: int, c: int, h: TestFunction, n: int):
    """Telescoped per-level contribution ``E*(l, c)``."""
    num = c * (2 * l + c - 1) * h.delta(l - 1) + c * (c - 1) * h.delta(l) - c * (c - 1)
    return _div(num, n * (n - 1))


def _div(num, den: int):
    if isinstance(num, (int, Fraction)):
        return Fraction(num, den) if isinstance(num, int) else num / den
    return num / den


def level_contribution(l_i: int, alpha_i: int, alpha_ip1: int, h: TestFunction, n: int):
    """Contribution ``E(l_i, alpha_i, alpha_{i+1})`` of level ``i+1`` to the drift functional."""
    nn = n * (n - 1)
    out = e_star(l_i, alpha_ip1, h, n)
    if alpha_i == 2:
        out += _div(2 * h(l_i - 1), nn)
    elif alpha_i == 1:
        out += _div(2 * (l_i - 1) * h(l_i - 1), nn)
    if alpha_ip1 == 2:
        out -= _div(2 * h(l_i + 1), nn)
    elif alpha_ip1 == 1:
        out -= _div(2 * l_i * h(l_i), nn)
    return out


def drift_functional(c: Configuration, h: TestFunction, v=1):
    """``L_alpha h`` in telescoped form: ``v - 1 + sum E*(l_i, a_{i+1})`` minus the last-level terms."""
    n = c.n
    ls = c.cumulative
    total = _frac(v) - 1 if isinstance(v, (int, Fraction)) else v - 1
    for i in range(c.m):
        total += e_star(ls[i], c.alpha[i], h, n)
    a_last = c.alpha[-1]
    if a_last == 2:
        total -= _div(2 * h(n - 1), n * (n - 1))
    elif a_last == 1:
        total -= _div(2 * (n - 1) * h(n - 1), n * (n - 1))
    return total


def drift_functional_direct(c: Configuration, h: TestFunction, v=1, increments=None):
    """``L_alpha h = v - V_alpha + sum_k h(k) E[dX_k]`` straight from the increments."""
    inc = expected_increments(c) if increments is None else increments
    total = v - speed_in_configuration(c)
    for k, e in inc.items():
        total += h(k) * e
    return total


# --- reduction machinery ---------------------------------------------------


def _binom_poly(x, k: int):
    out = Fraction(1)
    for j in range(k):
        out = out * (x - j) / (j + 1)
    return out


def _operator(c: int, p: Callable, l):
    """The level operator applied to ``p`` at ``l``: ``c(2l+c-1) dp(l-1) + c(c-1) dp(l)``."""
    return c * (2 * l + c - 1) * (p(l) - p(l - 1)) + c * (c - 1) * (p(l + 1) - p(l))


def q_n(n: int, a, b, beta) -> Fraction:
    """Closed-form ``Q_n(a, b)`` for ``n in {0, 1, 2}``."""
    if n == 0:
        return Fraction(0)
    if n == 1:
        return Fraction(2 * beta * (a - b - beta))
    if n == 2:
        return Fraction(-2 * beta * (a - b - beta) * (a + b - 1))
    raise ValueError("Q_n is only defined for n in {0, 1, 2}")


def q_n_direct(n: int, a, b, beta, l=0) -> Fraction:
    """``Q_n`` by applying the level operator to the binomial polynomial ``C(x, n)`` termwise."""
    p = lambda x: _binom_poly(Fraction(x), n)  # noqa: E731
    return (
        _operator(b, p, l + a)
        + _operator(a, p, l)
        - _operator(b + beta, p, l + a - beta)
        - _operator(a - beta, p, l)
    )


def d_k(c: Configuration, k: int, beta: int, A, B) -> Fraction:
    """Change ``L_alpha h - L_hat h`` when ``beta`` counters move from level ``k-1`` to ``k``.

    ``h`` is the quadratic ``A(x^2-1) + B(x+1)``; ``k`` is 1-based.
    """
    m = c.m
    if not 2 <= k <= m:
        raise ValueError(f"k must lie in 2..{m}")
    if k == m and c.alpha[-1] in (1, 2):
        raise ValueError("the last level is kept as it is when it holds one or two counters")
    a, b = c.alpha[k - 2], c.alpha[k - 1]
    if not -b <= beta <= a:
        raise ValueError(f"beta={beta} outside [-{b}, {a}]")
    n = c.n
    A, B = _frac(A), _frac(B)
    return -2 * beta * (a - b - beta) * (2 * A * (a + b) - 3 * A - B + 1) / (n * (n - 1))


def move_counters(c: Configuration, k: int, beta: int) -> Configuration:
    """Move ``beta`` counters from level ``k-1`` to level ``k`` (1-based); empty levels vanish."""
    alpha = list(c.alpha)
    alpha[k - 2] -= beta
    alpha[k - 1] += beta
    if alpha[k - 2] < 0 or alpha[k - 1] < 0:
        raise ValueError("cannot move more counters than a level holds")
    return Configuration(tuple(a for a in alpha if a > 0))


def worst_case_reduce(n: int, B=Fraction(1, 2)) -> list[Configuration]:
    """Candidate worst configurations (i)-(ix) for the upper-bound test function."""
    if n < 5:
        raise ValueError("candidate list needs N >= 5; use the exact small-N analysis")
    if Fraction(B) != Fraction(1, 2):
        raise ValueError("the candidate list is derived for B = 1/2 only")
    r = n % 3
    cands = [
        (n,),
        (n - 1, 1),
        (n - 2, 2),
        (-(-(n - 1) // 2), (n + 1) // 2),
        (n // 2, -(-n // 2) - 1, 1),
        (-(-(n - 2) // 2), (n - 2) // 2, 2),
    ]
    if r == 0:
        cands += [
            (n // 3, n // 3, n // 3),
            (n // 3, n // 3, (n - 3) // 3, 1),
            (n // 3, (n - 3) // 3, (n - 3) // 3, 2),
        ]
    elif r == 1:
        cands += [
            ((n + 2) // 3, (n - 1) // 3, (n - 1) // 3),
            ((n - 1) // 3, (n - 1) // 3, (n - 1) // 3, 1),
            ((n - 1) // 3, (n - 1) // 3, (n - 4) // 3, 2),
        ]
    else:
        cands += [
            ((n + 1) // 3, (n + 1) // 3, (n - 2) // 3),
            ((n + 1) // 3, (n - 2) // 3, (n - 2) // 3, 1),
            ((n - 2) // 3, (n - 2) // 3, (n - 2) // 3, 2),
        ]
    out = []
    for alpha in cands:
        # small N: some list items degenerate (empty level or a top level of one)
        if min(alpha) < 1 or alpha[0] < 2:
            continue
        c = Configuration(alpha)
        if c not in out:
            out.append(c)
    return out


def reduce_configuration(c: Configuration, B=Fraction(1, 2), max_moves: int = 10_000) -> Iterator[Configuration]:
    """Yield the configurations visited by repeated merging and rebalancing, starting with ``c``.

    Neighbouring levels ``(k-1, k)``, ``k >= 2``, are merged when they hold at
    most ``(N-2)(1-B) + 3/2`` counters between them; otherwise sizes differing
    by two or more are rebalanced to differ by at most one, the extra counter
    going to the lower level. When neither applies, a pair of sizes differing
    by exactly one is swapped if that unblocks a rebalance (staircases such as
    ``(5, 4, 3)``); the swap leaves the drift functional unchanged. The last
    level is left alone when it holds one or two counters.
    """
    threshold = (c.n - 2) * (1 - Fraction(B)) + Fraction(3, 2)

    def movable(cfg):
        for k in range(2, cfg.m + 1):
            if k == cfg.m and cfg.alpha[-1] in (1, 2):
                continue
            yield k, cfg.alpha[k - 2], cfg.alpha[k - 1]

    def rebalance(cfg):
        return next(((k, (a - b + 1) // 2) for k, a, b in movable(cfg) if abs(a - b) >= 2), None)

    yield c
    for _ in range(max_moves):
        move = next(((k, a) for k, a, b in movable(c) if a + b <= threshold), None)
        if move is None:
            move = rebalance(c)
        if move is None:
            for k, a, b in movable(c):
                if abs(a - b) == 1 and not (k == 2 and b < 2):
                    swapped = move_counters(c, k, a - b)
                    if rebalance(swapped) is not None:
                        c = swapped
                        yield c
                        move = rebalance(c)
                        break
        if move is None:
            return
        c = move_counters(c, *move)
        yield c
    raise RuntimeError("reduction did not terminate")


def table1_csv(n: int, l_i: int | None = None) -> str:
    """Expected increments for the nine level-pair cases as CSV of ``p/q`` strings."""
    if l_i is None:
        l_i = 3
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["case", "alpha_i", "alpha_ip1", "l_i", "E[dX_{l_i-1}]", "E[dX_{l_i}]", "E[dX_{l_i+1}]"])
    for alpha_ip1 in (3, 2, 1):
        for alpha_i in (3, 2, 1):
            if l_i < alpha_i or l_i + alpha_ip1 > n:
                continue
            inc = level_increments(l_i, alpha_i, alpha_ip1, n)
            cells = [str(inc.get(l_i + d, Fraction(0))) for d in (-1, 0, 1)]
            w.writerow([case_number(alpha_i, alpha_ip1), alpha_i, alpha_ip1, l_i, *cells])
    return buf.getvalue()

"""Counter race dynamics: exact one-step kernel, Monte Carlo speed and tails,
and Foster-Lyapunov drift evaluation.

Counters are indexed ``0..N-1``. Each step picks an unordered pair of distinct
counters uniformly at random; the lower counter moves up by one, or both move
when they are level. The gap chain tracks ``x_j = s_j - s_{j+1}`` for the
levels sorted in decreasing order, ``j = 1..N-2`` (the top two counters are
always level once the process starts with a tied top).
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np
from numba import njit

__all__ = [
    "CounterState",
    "GapState",
    "SpeedEstimate",
    "TailMeasurement",
    "step",
    "pairs",
    "representative_levels",
    "gaps_of",
    "one_step_distribution",
    "expected_updates",
    "make_rng",
    "default_burn_in",
    "simulate_speed",
    "sample_gap_states",
    "empirical_tails",
    "quadratic_drift",
    "exponential_drift",
    "quadratic_threshold",
    "exponential_threshold",
    "sample_far_states",
    "drift_check",
]


@dataclass(frozen=True)
class CounterState:
    levels: tuple[int, ...]

    def __post_init__(self):
        if len(self.levels) < 2:
            raise ValueError("need at least two counters")
        object.__setattr__(self, "levels", tuple(int(v) for v in self.levels))

    @property
    def n(self) -> int:
        return len(self.levels)

    @classmethod
    def initial(cls, n: int) -> "CounterState":
        return cls((0,) * n)


@dataclass(frozen=True)
class GapState:
    gaps: tuple[int, ...]

    def __post_init__(self):
        gaps = tuple(int(g) for g in self.gaps)
        if any(g < 0 for g in gaps):
            raise ValueError(f"gaps must be non-negative, got {gaps}")
        object.__setattr__(self, "gaps", gaps)

    @property
    def n(self) -> int:
        return len(self.gaps) + 2


@dataclass(frozen=True)
class SpeedEstimate:
    """Mean number of counters updated per step over a post-burn-in window."""

    mean: float
    stderr: float
    steps: int
    burn_in: int
    seed: int
    n: int = 0
    replica: int = 0

    def to_record(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TailMeasurement:
    """Empirical tails ``psi_k(t)``: fraction of counters at level >= k at step ``floor(tN)``."""

    values: dict = field(default_factory=dict)  # (k, t) -> fraction
    n: int = 0
    seed: int = 0

    @property
    def levels(self) -> list[int]:
        return sorted({k for k, _ in self.values})

    @property
    def times(self) -> list[float]:
        return sorted({t for _, t in self.values})

    def __call__(self, k: int, t: float) -> float:
        return self.values.get((k, t), 0.0)

    def to_record(self) -> dict:
        return {
            "n": self.n,
            "seed": self.seed,
            "values": [{"k": k, "t": t, "value": v} for (k, t), v in sorted(self.values.items())],
        }


def _as_gaps(x) -> tuple[int, ...]:
    if isinstance(x, GapState):
        return x.gaps
    return GapState(tuple(x)).gaps


def step(state: CounterState, pair: tuple[int, int]) -> tuple[CounterState, int]:
    """Apply one update to ``pair`` and return the new state and the number of counters moved."""
    i, j = pair
    n = state.n
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise IndexError(f"pair {pair} invalid for {n} counters")
    levels = list(state.levels)
    if levels[i] == levels[j]:
        levels[i] += 1
        levels[j] += 1
        updated = 2
    else:
        lo = i if levels[i] < levels[j] else j
        levels[lo] += 1
        updated = 1
    return CounterState(tuple(levels)), updated


def pairs(n: int) -> list[tuple[int, int]]:
    return list(combinations(range(n), 2))


def representative_levels(x) -> tuple[int, ...]:
    """Levels with the top pair at 0, descending by the gaps of ``x``."""
    gaps = _as_gaps(x)
    levels = [0, 0]
    for g in gaps:
        levels.append(levels[-1] - g)
    return tuple(levels)


def gaps_of(levels: Sequence[int]) -> tuple[int, ...]:
    s = sorted(levels, reverse=True)
    if len(s) >= 2 and s[0] != s[1]:
        raise ValueError("top level must hold at least two counters")
    return tuple(s[j] - s[j + 1] for j in range(1, len(s) - 1))


def one_step_distribution(x, n: int | None = None) -> list[tuple[tuple[int, ...], Fraction]]:
    """Exact law of the gap vector after one step, by enumeration of all pairs."""
    gaps = _as_gaps(x)
    if n is None:
        n = len(gaps) + 2
    if len(gaps) != n - 2:
        raise ValueError(f"gap vector of length {len(gaps)} does not match N={n}")
    state = CounterState(representative_levels(gaps))
    all_pairs = pairs(n)
    counts: dict[tuple[int, ...], int] = defaultdict(int)
    for pair in all_pairs:
        new, _ = step(state, pair)
        counts[gaps_of(new.levels)] += 1
    total = len(all_pairs)
    return sorted((g, Fraction(m, total)) for g, m in counts.items())


def expected_updates(x, n: int | None = None) -> Fraction:
    """Exact expected number of counters moved in one step from gap state ``x``."""
    gaps = _as_gaps(x)
    n = len(gaps) + 2 if n is None else n
    state = CounterState(representative_levels(gaps))
    all_pairs = pairs(n)
    return Fraction(sum(step(state, p)[1] for p in all_pairs), len(all_pairs))


# --- Monte Carlo -----------------------------------------------------------

_CHUNK = 1 << 20


def make_rng(seed: int, replica: int = 0) -> np.random.Generator:
    """Counter-based Philox stream; replicas get independent derived keys."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(replica)])
    return np.random.Generator(np.random.Philox(ss))


def default_burn_in(n: int) -> int:
    return 100 * n * math.comb(n, 2)


def _pair_tables(n: int) -> tuple[np.ndarray, np.ndarray]:
    p = np.array(pairs(n), dtype=np.int64)
    return p[:, 0].copy(), p[:, 1].copy()


@njit(cache=True)
def _run(levels, first, second, draws, out):
    for s in range(draws.shape[0]):
        k = draws[s]
        i = first[k]
        j = second[k]
        a = levels[i]
        b = levels[j]
        if a == b:
            levels[i] = a + 1
            levels[j] = b + 1
            out[s] = 2
        elif a < b:
            levels[i] = a + 1
            out[s] = 1
        else:
            levels[j] = b + 1
            out[s] = 1


@njit(cache=True)
def _run_quiet(levels, first, second, draws):
    for s in range(draws.shape[0]):
        k = draws[s]
        i = first[k]
        j = second[k]
        a = levels[i]
        b = levels[j]
        if a == b:
            levels[i] = a + 1
            levels[j] = b + 1
        elif a < b:
            levels[i] = a + 1
        else:
            levels[j] = b + 1


def _advance(levels, first, second, rng, n_pairs, steps):
    done = 0
    while done < steps:
        m = min(_CHUNK, steps - done)
        _run_quiet(levels, first, second, rng.integers(0, n_pairs, size=m))
        done += m


def simulate_speed(
    n: int,
    steps: int,
    burn_in: int | None = None,
    seed: int = 0,
    replica: int = 0,
    batches: int = 100,
) -> SpeedEstimate:
    """Estimate V(N) as counters updated per step, with a batch-means standard error.

    Counters start level at 0. The run is bitwise reproducible for fixed
    ``(n, steps, burn_in, seed, replica)``.
    """
    if n < 2:
        raise ValueError("N must be at least 2")
    if steps < 1:
        raise ValueError("steps must be positive")
    burn_in = default_burn_in(n) if burn_in is None else int(burn_in)
    if burn_in < 0:
        raise ValueError("burn_in must be non-negative")
    rng = make_rng(seed, replica)
    first, second = _pair_tables(n)
    n_pairs = first.shape[0]
    levels = np.zeros(n, dtype=np.int64)
    _advance(levels, first, second, rng, n_pairs, burn_in)

    nb = max(1, min(batches, steps))
    edges = np.linspace(0, steps, nb + 1).astype(np.int64)
    batch_sums = np.zeros(nb, dtype=np.int64)
    buf = np.empty(_CHUNK, dtype=np.int8)
    done = 0
    while done < steps:
        m = min(_CHUNK, steps - done)
        draws = rng.integers(0, n_pairs, size=m)
        _run(levels, first, second, draws, buf[:m])
        # scatter this chunk's updates into the batches it overlaps
        csum = np.concatenate(([0], np.cumsum(buf[:m], dtype=np.int64)))
        lo = np.clip(edges - done, 0, m)
        batch_sums += csum[lo[1:]] - csum[lo[:-1]]
        done += m

    total = int(batch_sums.sum())
    mean = total / steps
    if nb >= 2:
        means = batch_sums / np.diff(edges)
        stderr = float(np.std(means, ddof=1) / math.sqrt(nb))
    else:
        stderr = 0.0
    return SpeedEstimate(
        mean=mean, stderr=stderr, steps=int(steps), burn_in=burn_in, seed=int(seed), n=n, replica=replica
    )


def sample_gap_states(
    n: int, samples: int, thin: int = 1, burn_in: int | None = None, seed: int = 0
) -> np.ndarray:
    """Gap vectors observed every ``thin`` steps after burn-in, shape ``(samples, n-2)``."""
    if n < 3:
        raise ValueError("N must be at least 3")
    burn_in = default_burn_in(n) if burn_in is None else burn_in
    rng = make_rng(seed)
    first, second = _pair_tables(n)
    n_pairs = first.shape[0]
    levels = np.zeros(n, dtype=np.int64)
    _advance(levels, first, second, rng, n_pairs, burn_in)
    out = np.empty((samples, n - 2), dtype=np.int64)
    for s in range(samples):
        _advance(levels, first, second, rng, n_pairs, thin)
        srt = np.sort(levels)[::-1]
        out[s] = srt[1:-1] - srt[2:]
    return out


def empirical_tails(
    n: int,
    horizon: float,
    seed: int = 0,
    times: Iterable[float] | None = None,
    max_level: int | None = None,
) -> TailMeasurement:
    """Fractions of counters at level >= k at steps ``floor(t*n)`` for each grid time ``t``."""
    if n < 3:
        raise ValueError("N must be at least 3")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    grid = sorted(set(float(t) for t in times)) if times is not None else list(np.linspace(0.0, horizon, 11))
    if grid[0] < 0 or grid[-1] > horizon + 1e-12:
        raise ValueError("grid times must lie in [0, horizon]")
    rng = make_rng(seed)
    first, second = _pair_tables(n)
    n_pairs = first.shape[0]
    levels = np.zeros(n, dtype=np.int64)
    snapshots = []
    done = 0
    for t in grid:
        target = int(math.floor(t * n))
        _advance(levels, first, second, rng, n_pairs, target - done)
        done = target
        snapshots.append((t, np.bincount(levels.astype(np.int64))))
    top = max(len(c) for _, c in snapshots)
    kmax = top if max_level is None else max_level
    values = {}
    for t, counts in snapshots:
        padded = np.zeros(kmax + 2, dtype=np.int64)
        m = min(len(counts), kmax + 2)
        padded[:m] = counts[:m]
        if len(counts) > kmax + 2:
            padded[-1] += counts[kmax + 2 :].sum()
        at_least = np.cumsum(padded[::-1])[::-1] / n
        for k in range(kmax + 1):
            values[(k, t)] = float(at_least[k])
    return TailMeasurement(values=values, n=n, seed=int(seed))


# --- Lyapunov drift --------------------------------------------------------


def quadratic_threshold(n: int) -> Fraction:
    return Fraction(5, 4) * n * (n + 1)


def exponential_threshold(n: int) -> float:
    return 2.0 * math.log(16 * n * n)


def quadratic_drift(x, n: int | None = None) -> Fraction:
    """``E_x L(X(1)) - L(x)`` for ``L(x) = sum x_i^2``, exactly."""
    gaps = _as_gaps(x)
    base = sum(g * g for g in gaps)
    return sum((p * (sum(g * g for g in y) - base) for y, p in one_step_distribution(gaps, n)), Fraction(0))


def exponential_drift(x, n: int | None = None, r: float = 0.5) -> float:
    """``E_x L(X(1)) - L(x)`` for ``L(x) = sum exp(r x_i)``.

    Evaluated coordinate-wise as ``exp(r x_i) * E[expm1(r dX_i)]`` so that large
    gaps do not cancel catastrophically.
    """
    if not 0 < r <= 1:
        raise ValueError("r must lie in (0, 1]")
    gaps = _as_gaps(x)
    total = 0.0
    for y, p in one_step_distribution(gaps, n):
        pf = float(p)
        for xi, yi in zip(gaps, y):
            if yi != xi:
                total += pf * math.exp(r * xi) * math.expm1(r * (yi - xi))
    return total


def sample_far_states(n: int, samples: int, threshold: float, seed: int = 0) -> list[tuple[int, ...]]:
    """Random gap vectors whose largest entry exceeds ``threshold``.

    One coordinate is drawn from ``(threshold, 2 threshold]``; each other one is 0
    with probability 1/2 and otherwise uniform on ``1..2 threshold``, so zero
    patterns (configurations) are well mixed.
    """
    if n < 3:
        raise ValueError("N must be at least 3")
    rng = make_rng(seed, 1)
    hi = max(2, int(math.floor(2 * threshold)))
    lo = int(math.floor(threshold)) + 1
    out = []
    for _ in range(samples):
        gaps = np.where(rng.random(n - 2) < 0.5, 0, rng.integers(1, hi + 1, size=n - 2))
        gaps[rng.integers(0, n - 2)] = rng.integers(lo, max(lo, hi) + 1)
        out.append(tuple(int(g) for g in gaps))
    return out


def drift_check(n: int, samples: int = 1000, seed: int = 0, r: float = 0.5) -> dict:
    """Worst drifts of both Lyapunov functions over states beyond their thresholds."""
    q_thr = quadratic_threshold(n)
    e_thr = exponential_threshold(n)
    q_states = sample_far_states(n, samples, float(q_thr), seed)
    e_states = sample_far_states(n, samples, e_thr, seed + 1)
    q_vals = [(quadratic_drift(x, n), x) for x in q_states if max(x) >= q_thr]
    e_vals = [(exponential_drift(x, n, r), x) for x in e_states if max(x) > e_thr]
    q_worst = max(q_vals)
    e_worst = max(e_vals)
    return {
        "n": n,
        "samples": samples,
        "quadratic_threshold": float(q_thr),
        "quadratic_max_drift": float(q_worst[0]),
        "quadratic_worst_state": list(q_worst[1]),
        "quadratic_violations": sum(1 for v, _ in q_vals if v > -1),
        "exponential_threshold": e_thr,
        "exponential_max_drift": e_worst[0],
        "exponential_worst_state": list(e_worst[1]),
        "exponential_violations": sum(1 for v, _ in e_vals if v > -1),
        "r": r,
    }

"""Mean-field ODE hierarchy for the level tails and its travelling front.

Integrated in the ``phi`` clock, where ``phi_0 = 1`` and

    phi_{k+1}' = phi_k (phi_k - phi_{k+1}),   phi_k(0) = 0 for k >= 1,

so that ``phi_1(t) = 1 - exp(-t)``. The particle tails satisfy
``psi_k(s) = phi_k(2 s)`` (one unit of ``psi`` time is ``N`` steps), hence front
speeds in the ``psi`` clock are twice those in the ``phi`` clock.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import integrate as spi

__all__ = [
    "StepSizeError",
    "InsufficientHorizonError",
    "MeanFieldState",
    "WaveEstimate",
    "integrate",
    "wave_speed",
    "tail_diagnostics",
    "phi_integral_form",
    "psi",
]

FLOOR = 1e-15
MODELS = {"race": 0, "power2": 1}


class StepSizeError(ValueError):
    pass


class InsufficientHorizonError(ValueError):
    pass


@dataclass
class MeanFieldState:
    phi: np.ndarray  # (K+1, n_records)
    times: np.ndarray
    dt: float
    K: int
    crossing_times: np.ndarray  # phi-clock time where phi_k first reaches 1/2; nan if never
    model: str = "race"
    time_scale: str = "phi"

    def at(self, k: int, t: float) -> float:
        """``phi_k(t)`` by linear interpolation between recorded times."""
        return float(np.interp(t, self.times, self.phi[k]))

    def psi(self, k: int, s: float) -> float:
        return self.at(k, 2.0 * s)

    def to_records(self, levels=None) -> list[dict]:
        levels = range(self.K + 1) if levels is None else levels
        return [
            {"k": int(k), "t": float(t), "phi": float(self.phi[k, j])}
            for k in levels
            for j, t in enumerate(self.times)
        ]


@dataclass
class WaveEstimate:
    crossing_times: np.ndarray
    speed: float  # psi clock
    speed_phi: float
    spacing: np.ndarray
    window: tuple[int, int]
    profile_x: np.ndarray = field(default_factory=lambda: np.empty(0))
    profile: np.ndarray = field(default_factory=lambda: np.empty(0))
    profile_levels: tuple[int, ...] = ()
    collapse_error: float = math.nan
    tail_stats: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "speed_psi": self.speed,
            "speed_phi": self.speed_phi,
            "window": list(self.window),
            "collapse_error": self.collapse_error,
            "profile_levels": list(self.profile_levels),
            "crossing_times": [float(t) for t in self.crossing_times],
            "tail_stats": self.tail_stats,
        }


@njit(cache=True)
def _rhs(y, out, top, model):
    for k in range(1, top + 1):
        a = y[k - 1]
        b = y[k]
        if model == 0:
            out[k] = a * (a - b)
        else:
            out[k] = 0.5 * (a * a - b * b)


@njit(cache=True)
def _rk4(phi0, dt, n_steps, record_every, records, crossings, model):
    """Classical RK4; returns 0 on success or the step index where an invariant broke."""
    K = phi0.shape[0] - 1
    y = phi0.copy()
    k1 = np.zeros(K + 1)
    k2 = np.zeros(K + 1)
    k3 = np.zeros(K + 1)
    k4 = np.zeros(K + 1)
    tmp = np.empty(K + 1)
    old = np.empty(K + 1)
    next_cross = 1
    front = 0
    rec = 1
    records[:, 0] = y
    for s in range(n_steps):
        # highest non-negligible level; one RK4 step feeds four levels beyond it
        while front < K and y[front + 1] > 1e-15:
            front += 1
        top = min(K, front + 4)
        old[: top + 1] = y[: top + 1]
        _rhs(y, k1, top, model)
        for k in range(top + 1):
            tmp[k] = y[k] + 0.5 * dt * k1[k]
        _rhs(tmp, k2, top, model)
        for k in range(top + 1):
            tmp[k] = y[k] + 0.5 * dt * k2[k]
        _rhs(tmp, k3, top, model)
        for k in range(top + 1):
            tmp[k] = y[k] + dt * k3[k]
        _rhs(tmp, k4, top, model)
        for k in range(1, top + 1):
            y[k] = y[k] + dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k])
        for k in range(1, top + 1):
            if y[k] > y[k - 1] + 1e-12 or y[k] < -1e-12 or y[k] > 1.0 + 1e-12 or y[k] < old[k] - 1e-12:
                return s + 1
        t_new = (s + 1) * dt
        while next_cross <= K and y[next_cross] >= 0.5:
            a = old[next_cross]
            b = y[next_cross]
            crossings[next_cross] = t_new - dt + dt * (0.5 - a) / (b - a) if b > a else t_new
            next_cross += 1
        if (s + 1) % record_every == 0:
            records[:, rec] = y
            rec += 1
    return 0


def integrate(K: int, T: float, dt: float, model: str = "race", record_dt: float | None = None) -> MeanFieldState:
    """Integrate levels ``0..K`` on ``[0, T]`` (phi clock) with fixed-step RK4.

    Half-crossing times are located at full step resolution; the curves
    themselves are stored every ``record_dt`` (default: every step up to 20000
    records, then coarser).
    """
    if K < 2:
        raise ValueError("K must be at least 2")
    if T <= 0 or dt <= 0:
        raise ValueError("T and dt must be positive")
    if model not in MODELS:
        raise ValueError(f"model must be one of {sorted(MODELS)}")
    n_steps = int(round(T / dt))
    if record_dt is None:
        record_every = max(1, -(-n_steps // 20000))
    else:
        record_every = max(1, int(round(record_dt / dt)))
    n_rec = n_steps // record_every + 1
    records = np.zeros((K + 1, n_rec))
    crossings = np.full(K + 1, np.nan)
    phi0 = np.zeros(K + 1)
    phi0[0] = 1.0
    status = _rk4(phi0, dt, n_steps, record_every, records, crossings, MODELS[model])
    if status:
        raise StepSizeError(
            f"ordering/monotonicity of the tails broke at step {status} (t={status * dt:.4g}); reduce dt"
        )
    times = np.arange(n_rec) * record_every * dt
    return MeanFieldState(records, times, dt, K, crossings, model=model)


def psi(state: MeanFieldState, k: int, s: float) -> float:
    return state.psi(k, s)


def _extrapolate(levels: np.ndarray, spacing: np.ndarray) -> float:
    """Limit of the crossing spacing, fitting ``a + b/k + c/k^2`` (Richardson-style) over the window."""
    x = 1.0 / levels
    X = np.vstack([np.ones_like(x), x, x * x]).T
    coef, *_ = np.linalg.lstsq(X, spacing, rcond=None)
    return float(coef[0])


def wave_speed(
    state: MeanFieldState,
    level_window: tuple[int, int] | None = None,
    profile_levels: tuple[int, ...] | None = None,
    x_grid: np.ndarray | None = None,
) -> WaveEstimate:
    """Front speed from half-crossing times; reported in the psi clock (``2 / spacing``)."""
    ct = state.crossing_times
    crossed = np.flatnonzero(~np.isnan(ct[1:])) + 1
    if crossed.size < 8:
        raise InsufficientHorizonError(f"only {crossed.size} levels crossed 1/2; increase T or K")
    last = int(crossed.max())
    if level_window is None:
        level_window = (max(1, int(0.75 * last)), last)
    lo, hi = level_window
    if hi > last or lo < 1 or hi - lo < 4:
        raise InsufficientHorizonError(f"window {level_window} not covered by crossed levels 1..{last}")
    ks = np.arange(lo, hi)
    spacing = ct[ks + 1] - ct[ks]
    limit = _extrapolate(ks + 0.5, spacing)
    speed_phi = 1.0 / limit
    est = WaveEstimate(
        crossing_times=ct[1 : last + 1].copy(),
        speed=2.0 * speed_phi,
        speed_phi=speed_phi,
        spacing=np.diff(ct[1 : last + 1]),
        window=(lo, hi),
    )
    if profile_levels is None:
        profile_levels = tuple(sorted({max(lo, 1), (lo + hi) // 2, hi}))
    if x_grid is None:
        x_grid = np.linspace(-12.0, 24.0, 721)
    curves = []
    for k in profile_levels:
        t = (k + x_grid) / speed_phi
        curves.append(np.interp(t, state.times, state.phi[k], right=np.nan))
    curves = np.array(curves)
    est.profile_x = np.asarray(x_grid, dtype=float)
    # lowest level has the longest recorded history behind the front
    est.profile = curves[0]
    est.profile_levels = tuple(int(k) for k in profile_levels)
    est.collapse_error = float(np.nanmax(np.abs(curves - curves[0])))
    return est


def _linfit(x: np.ndarray, y: np.ndarray) -> dict:
    if x.size < 3:
        return {"points": int(x.size)}
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(slope), "intercept": float(intercept), "r2": r2, "points": int(x.size)}


def tail_diagnostics(w: WaveEstimate, lo: float = 1e-13, hi: float = 1e-2) -> dict:
    """Regressions of both tails of the front profile on exponential and double-exponential models.

    Exploratory only: the fits report slopes and R^2, nothing is asserted.
    """
    x = w.profile_x
    H = w.profile
    ok = ~np.isnan(H)
    x, H = x[ok], H[ok]
    report: dict = {"partial": False}
    left = (H > lo) & (H < hi)
    right = (1 - H > lo) & (1 - H < hi)
    for name, mask, small in (("left", left, H), ("right", right, 1 - H)):
        if mask.sum() < 3:
            report["partial"] = True
            report[name] = {"points": int(mask.sum())}
            continue
        xs, ys = x[mask], small[mask]
        report[name] = {
            "decades": float(np.log10(ys.max() / ys.min())),
            "exponential": _linfit(xs, np.log(ys)),
            "double_exponential": _linfit(xs, np.log(-np.log(ys))),
        }
        if report[name]["decades"] < 4:
            report["partial"] = True
    w.tail_stats = report
    return report


def phi_integral_form(k: int, t: float) -> float:
    """``phi_k(t)`` from the recursive integral solution, by adaptive quadrature.

    ``phi_1`` is closed form; ``phi_2`` uses one quadrature with the exact inner
    integral of ``phi_1``; ``phi_3`` nests quadratures and is meant for spot checks.
    """
    if k == 0:
        return 1.0
    if k == 1:
        return -math.expm1(-t)
    if k == 2:
        def int_phi1(s, u):  # integral of phi_1 over [s, u]
            return (u - s) - (math.exp(-s) - math.exp(-u))

        val, _ = spi.quad(lambda s: (-math.expm1(-s)) ** 2 * math.exp(-int_phi1(s, t)), 0.0, t, epsabs=1e-13, epsrel=1e-12, limit=200)
        return val
    if k == 3:
        def inner(s):
            v, _ = spi.quad(lambda u: phi_integral_form(2, u), s, t, epsabs=1e-12, epsrel=1e-10, limit=200)
            return v

        val, _ = spi.quad(lambda s: phi_integral_form(2, s) ** 2 * math.exp(-inner(s)), 0.0, t, epsabs=1e-11, epsrel=1e-9, limit=100)
        return val
    raise ValueError("the integral form is implemented for k <= 3")

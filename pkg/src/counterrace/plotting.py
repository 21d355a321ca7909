"""Figure rendering for CLI reports. matplotlib is imported lazily (Agg backend)."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update({"figure.figsize": (6.0, 3.8), "axes.grid": True, "grid.alpha": 0.3, "font.size": 9})
    return plt


def _save(fig, out_dir, name) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{name}.png"
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    fig.clf()
    return path


def plot_phi_curves(state, levels=(1, 3, 5, 7, 9, 11), out_dir=".", name="phi_curves") -> Path:
    plt = _plt()
    fig, ax = plt.subplots()
    for k in levels:
        if k <= state.K:
            ax.plot(state.times, state.phi[k], lw=1.2, label=f"k={k}")
    ax.set_xlabel("t (phi clock)")
    ax.set_ylabel(r"$\varphi_k(t)$")
    ax.set_xlim(0, min(state.times[-1], 3.0 * max(levels) + 10))
    ax.legend(fontsize=7, ncol=2)
    return _save(fig, out_dir, name)


def plot_front(wave, out_dir=".", name="front") -> Path:
    plt = _plt()
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    k = np.arange(1, wave.spacing.size + 1)
    a1.plot(k, 2.0 / wave.spacing, ".", ms=3)
    a1.axhline(wave.speed, color="k", lw=0.8, ls="--")
    a1.set_xlabel("level k")
    a1.set_ylabel("2 / spacing")
    a2.semilogy(wave.profile_x, wave.profile, lw=1.2, label="H")
    a2.semilogy(wave.profile_x, 1 - wave.profile, lw=1.2, label="1 - H")
    a2.set_ylim(1e-16, 2)
    a2.set_xlabel("x")
    a2.legend(fontsize=7)
    return _save(fig, out_dir, name)


def plot_table4(rows: list[dict], out_dir=".", name="table4") -> Path:
    plt = _plt()
    fig, ax = plt.subplots()
    ns = [r["n"] for r in rows]
    for key, style in (("theoretical", "o-"), ("numerical", "s-"), ("simulated", "^-")):
        ys = [r.get(key) for r in rows]
        pts = [(n, y) for n, y in zip(ns, ys) if y is not None]
        if pts:
            ax.plot(*zip(*pts), style, ms=4, lw=1.0, label=key)
    ax.set_xlabel("N")
    ax.set_ylabel("speed")
    ax.legend(fontsize=7)
    return _save(fig, out_dir, name)


def plot_lp(solution, fit=None, out_dir=".", name=None) -> Path:
    plt = _plt()
    fig, ax = plt.subplots()
    k = np.arange(1, len(solution.h_values) + 1)
    ax.plot(k, solution.h_values, "o", ms=4, label="LP optimum")
    if fit is not None:
        kk = np.linspace(k[0], k[-1], 200)
        ax.plot(kk, fit(kk), lw=1.0, label="quadratic fit")
    ax.set_xlabel("k")
    ax.set_ylabel("h(k)")
    ax.legend(fontsize=7)
    return _save(fig, out_dir, name or f"lp_n{solution.n}")


def plot_n4(stat, out_dir=".", name="n4_stationary", box=30) -> Path:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(4.6, 4.0))
    g = stat.grid[:box, :box]
    im = ax.imshow(np.log10(np.maximum(g, 1e-300)).T, origin="lower", vmin=-12, vmax=0, cmap="viridis")
    fig.colorbar(im, ax=ax, label="log10 pi(k, l)")
    ax.set_xlabel("k")
    ax.set_ylabel("l")
    ax.grid(False)
    return _save(fig, out_dir, name)

"""Figures for the CLI report path (matplotlib, file output only)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_lyapunov(E, L, N, path, floor=None):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(E, L, "o-", ms=3)
    if floor is not None:
        ax.axhline(floor, color="k", lw=0.8, ls="--", label=f"{floor:.4g}")
        ax.legend()
    ax.set_xlabel("E")
    ax.set_ylabel(f"L_N (N={N})")
    return _save(fig, path)


def plot_bands(reports, path):
    """One row of bands per scale; gaps show as white space."""
    fig, ax = plt.subplots(figsize=(7, 0.5 + 0.45 * len(reports)))
    for row, rep in enumerate(reports):
        for lo, hi in rep.bands:
            ax.plot([lo, hi], [row, row], lw=6, solid_capstyle="butt", color="C0")
        for pg in rep.pregaps:
            lo, hi = pg["interval"] if isinstance(pg, dict) else pg.interval
            ax.axvspan(lo, hi, color="C3", alpha=0.3)
    ax.set_yticks(range(len(reports)))
    ax.set_yticklabels([f"N={r.N} ({r.bc})" for r in reports])
    ax.set_xlabel("E")
    return _save(fig, path)


def plot_rellich(graph, path, max_bands=None):
    fig, ax = plt.subplots(figsize=(6, 5))
    J = graph.E.shape[1] if max_bands is None else min(max_bands, graph.E.shape[1])
    for j in range(J):
        ax.plot(graph.xs, graph.E[:, j], lw=0.7)
    if graph.near_crossing.any():
        xs = graph.xs[:-1][graph.near_crossing]
        ax.plot(xs, np.full(xs.shape, graph.E.min()), "|", color="k", ms=6)
    ax.set_xlabel("x")
    ax.set_ylabel(f"E_j(x), N={graph.N}")
    return _save(fig, path)


def plot_zeros(zeros, R1, R2, path):
    z = np.asarray(zeros, complex)
    fig, ax = plt.subplots(figsize=(5, 5))
    t = np.linspace(0, 2 * np.pi, 400)
    for R in (R1, R2):
        ax.plot(R * np.cos(t), R * np.sin(t), "k", lw=0.6)
    if z.size:
        ax.plot(z.real, z.imag, ".", ms=3)
    ax.set_aspect("equal")
    return _save(fig, path)

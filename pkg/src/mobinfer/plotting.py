"""Figure rendering for the CLI report path.

Everything here draws to files with the Agg backend; the library
metrics stay figure-free and the CLI only calls in when asked to plot.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .model import Corridor, MobilityTrace, Torus


def plot_series(
    path: str | Path,
    times: np.ndarray,
    curves: list[tuple[np.ndarray, str]],
    xlabel: str = "time (s)",
    ylabel: str = "",
    title: str | None = None,
) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for values, label in curves:
        mask = np.isfinite(values)
        ax.plot(np.asarray(times)[mask], np.asarray(values)[mask], label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(curves) > 1:
        ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_scatter(
    path: str | Path,
    x: np.ndarray,
    y: np.ndarray,
    xlabel: str,
    ylabel: str,
    max_points: int = 100_000,
) -> Path:
    x = np.asarray(x).ravel()
    y = np.asarray(y).ravel()
    if len(x) > max_points:
        # deterministic thinning keeps the figure light
        stride = len(x) // max_points + 1
        x, y = x[::stride], y[::stride]
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(x, y, ".", markersize=1, alpha=0.25)
    lim = max(x.max(), y.max()) if len(x) else 1.0
    ax.plot([0, lim], [0, lim], "k--", linewidth=0.8)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_xlim(0, lim)
    ax.set_ylim(0, lim)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_cdfs(
    path: str | Path,
    curves: list[tuple[np.ndarray, np.ndarray, str]],
    xlabel: str = "inter-contact time (s)",
) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for values, cdf, label in curves:
        if len(values):
            ax.step(values, cdf, where="post", label=label)
    positive = [v for values, _, _ in curves for v in np.asarray(values) if v > 0]
    if positive and max(positive) / min(positive) > 100:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("CDF")
    ax.set_ylim(0, 1.02)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_frame(
    path: str | Path,
    m: MobilityTrace,
    sample: int,
    contacts: list[tuple[int, int]],
) -> Path:
    pos = m.positions[sample]
    fig, ax = plt.subplots(figsize=(6, 6))
    for a, b in contacts:
        ax.plot(pos[[a, b], 0], pos[[a, b], 1], "-", color="0.7", linewidth=0.8, zorder=1)
    ax.scatter(pos[:, 0], pos[:, 1], s=12, zorder=2)
    if isinstance(m.space, Torus):
        ax.set_xlim(0, m.space.width)
        ax.set_ylim(0, m.space.height)
    elif isinstance(m.space, Corridor):
        ax.axhline(m.space.half_width, color="k", linewidth=0.8)
        ax.axhline(-m.space.half_width, color="k", linewidth=0.8)
    ax.set_aspect("equal")
    ax.set_title(f"t = {sample * m.timestep:g} s")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)

"""File-based figure rendering for the CLI report path (headless Agg)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_trajectory_plot(times, states, controls, path) -> None:
    """State components (piecewise-affine) and controls (steps) vs time."""
    times = np.asarray(times, dtype=float)
    states = np.atleast_2d(np.asarray(states, dtype=float))
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for j in range(states.shape[1]):
        ax0.plot(times, states[:, j], label=f"x{j + 1}")
    ax0.set_ylabel("state")
    ax0.legend(loc="best", fontsize=8)
    ax0.grid(True, alpha=0.3)
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    for j in range(controls.shape[1]):
        ax1.step(times[:-1], controls[:, j], where="post", label=f"u{j + 1}")
    ax1.set_xlabel("t")
    ax1.set_ylabel("control")
    ax1.legend(loc="best", fontsize=8)
    ax1.grid(True, alpha=0.3)
    _finish(fig, path)


def save_convergence_plot(levels, series: dict, path, ylabel: str = "error") -> None:
    """Semilog-y convergence curves keyed by column name."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    levels = np.asarray(levels)
    for name, vals in series.items():
        vals = np.asarray(vals, dtype=float)
        positive = np.where(vals > 0, vals, np.nan)
        ax.semilogy(levels, positive, marker="o", label=name)
    ax.set_xlabel("level m")
    ax.set_ylabel(ylabel)
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    _finish(fig, path)


def save_cauchy_plot(ks, gaps, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    gaps = np.asarray(gaps, dtype=float)
    ax.loglog(np.asarray(ks, dtype=float), np.where(gaps > 0, gaps, np.nan),
              marker="o")
    ax.set_xlabel("mesh intervals k")
    ax.set_ylabel("sup gap to refinement")
    ax.grid(True, which="both", alpha=0.3)
    _finish(fig, path)

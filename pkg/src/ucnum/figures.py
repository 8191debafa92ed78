"""Headless figure rendering for run reports and chain analyses.

Every function takes data already produced elsewhere (a run trace or a
chain), renders one figure with the Agg backend and writes it to a
file, returning the path.  Nothing here recomputes dynamics.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .trace import RunTrace

__all__ = [
    "plot_utility_progress",
    "plot_price_trajectories",
    "plot_tv_decay",
    "plot_stationary_mass",
]

_DPI = 150


def _finish(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def _downsample(x: np.ndarray, y: np.ndarray, cap: int = 4000):
    if x.size <= cap:
        return x, y
    stride = int(np.ceil(x.size / cap))
    return x[::stride], y[::stride]


def plot_utility_progress(
    trace: RunTrace,
    path,
    optimum: Optional[float] = None,
    optimum_label: str = "optimum",
) -> Path:
    """Aggregate normalized utility over time, with an optional optimum
    reference line.  Works for both engines: frame-indexed traces plot
    the running and Cesaro curves, slot-indexed traces the running sum."""
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    if "frame" in trace.columns:
        x = trace.data["frame"]
        ax.plot(x, trace.data["sum_utility"], lw=0.9, label="per frame")
        if "cesaro_sum_utility" in trace.columns:
            ax.plot(
                x,
                trace.data["cesaro_sum_utility"],
                lw=1.6,
                label="running average",
            )
        ax.set_xlabel("frame")
    else:
        x, y = _downsample(trace.data["slot"], trace.data["sum_utility"])
        ax.plot(x, y, lw=1.1, label="running mean utility")
        ax.set_xlabel("slot")
    if optimum is not None:
        ax.axhline(optimum, color="k", ls="--", lw=1.0, label=optimum_label)
    ax.set_ylabel("sum of normalized utilities")
    ax.legend(loc="lower right", fontsize=8)
    ax.set_title(f"{trace.algo}: utility progress")
    return _finish(fig, path)


def plot_price_trajectories(trace: RunTrace, path) -> Path:
    """Per-node price paths across frames, with their flow targets."""
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    x = trace.data["frame"]
    i = 0
    while f"lambda_{i}" in trace.data:
        ax.plot(x, trace.data[f"lambda_{i}"], lw=1.2, label=f"price node {i}")
        i += 1
    ax.set_xlabel("frame")
    ax.set_ylabel("price")
    ax.legend(loc="best", fontsize=8)
    ax.set_title(f"{trace.algo}: price trajectories")
    return _finish(fig, path)


def plot_tv_decay(
    ts: Sequence[int],
    distances: Sequence[float],
    bounds: Sequence[float],
    path,
    title: str = "distance to stationarity",
) -> Path:
    """Exact worst-start total-variation decay against its geometric
    envelope, log scale."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ts = np.asarray(ts)
    ax.semilogy(ts, np.maximum(np.asarray(distances), 1e-300), "o-", lw=1.2,
                ms=3, label="exact distance")
    ax.semilogy(ts, np.maximum(np.asarray(bounds), 1e-300), "--", lw=1.2,
                label="contraction bound")
    ax.set_xlabel("slot")
    ax.set_ylabel("total variation")
    ax.legend(loc="best", fontsize=8)
    ax.set_title(title)
    return _finish(fig, path)


def plot_stationary_mass(
    eps_values: Sequence[float],
    masses: Sequence[float],
    path,
    label: str = "mass on optimal aligned states",
) -> Path:
    """Stationary mass of a state set as the exploration rate shrinks."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.semilogx(eps_values, masses, "o-", lw=1.4)
    ax.set_xlabel("exploration rate")
    ax.set_ylabel(label)
    ax.set_ylim(0.0, 1.02)
    ax.invert_xaxis()
    ax.set_title("stationary mass vs exploration rate")
    return _finish(fig, path)

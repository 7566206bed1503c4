"""Figure rendering for the report paths (bench timings, cost landscapes)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def render_bench_figure(rows, path):
    """Timing-vs-size curves, one line per phase.

    rows: sequence of dicts with keys n, phase, median_ms.
    """
    fig, ax = plt.subplots(figsize=(6, 4))
    phases = sorted({r["phase"] for r in rows})
    for phase in phases:
        pts = sorted((r["n"], r["median_ms"]) for r in rows if r["phase"] == phase)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=phase)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("input size n")
    ax.set_ylabel("median wall time (ms)")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_landscape_figure(xs, ys, costs, path, opt_xy=None):
    """Heatmap of a cost-landscape slice."""
    xs = np.asarray(xs)
    ys = np.asarray(ys)
    grid = np.asarray(costs).reshape(len(xs), len(ys))
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    pcm = ax.pcolormesh(xs, ys, grid.T, shading="nearest", cmap="viridis")
    fig.colorbar(pcm, ax=ax, label="cost")
    if opt_xy is not None:
        ax.plot([opt_xy[0]], [opt_xy[1]], "r+", markersize=12, markeredgewidth=2)
    ax.set_xlabel("slice axis 1")
    ax.set_ylabel("slice axis 2")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)

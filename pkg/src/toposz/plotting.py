"""Static figures for sweeps and iteration traces.

Figures are built with the object API on an Agg canvas, so nothing here
touches pyplot's global state and it is safe to call from worker processes.
"""
from __future__ import annotations

import math

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

PALETTE = ["#377eb8", "#ff7f00", "#4daf4a", "#e41a1c", "#984ea3", "#a65628"]

SWEEP_PANELS = [
    ("ratio", "compression ratio"),
    ("psnr", "PSNR (dB)"),
    ("bottleneck", "bottleneck distance"),
    ("wasserstein2", "Wasserstein-2 distance"),
]


def _new_figure(width=8.0, height=None):
    golden = (math.sqrt(5) - 1.0) / 2.0
    fig = Figure(figsize=(width, height or width * golden))
    FigureCanvasAgg(fig)
    return fig


def _save(fig, path):
    # no timestamps or software tags, so identical data gives identical bytes
    fig.savefig(path, dpi=100, metadata={"Software": None})


def plot_sweep(rows, x_key: str, path, group_key: str | None = None) -> None:
    """Four panels of metrics against ``x_key``, one line per ``group_key`` value."""
    fig = _new_figure(9.0, 6.5)
    axes = fig.subplots(2, 2)
    groups = sorted({r[group_key] for r in rows}) if group_key else [None]
    for ax, (key, label) in zip(axes.flat, SWEEP_PANELS):
        for color, g in zip(PALETTE * len(groups), groups):
            sel = sorted((r for r in rows if g is None or r[group_key] == g), key=lambda r: r[x_key])
            xs = [r[x_key] for r in sel]
            ys = [r[key] for r in sel]
            name = None if g is None else f"{group_key}={g:g}"
            ax.plot(xs, ys, marker="o", color=color, label=name)
        ax.set_xlabel(x_key)
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
    if group_key and len(groups) > 1:
        axes.flat[0].legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def plot_trace(trace, path) -> None:
    """False cases and compression ratio per refinement step."""
    fig = _new_figure(7.0)
    ax = fig.subplots()
    steps = [s.step for s in trace.steps]
    ax.bar(steps, [s.fp for s in trace.steps], color=PALETTE[0], label="FP")
    ax.bar(steps, [s.fn for s in trace.steps], bottom=[s.fp for s in trace.steps],
           color=PALETTE[1], label="FN")
    ax.bar(steps, [s.ft for s in trace.steps], bottom=[s.fp + s.fn for s in trace.steps],
           color=PALETTE[2], label="FT")
    ax.set_xlabel("iteration")
    ax.set_ylabel("false cases")
    ax.legend(loc="upper left", fontsize=8)
    twin = ax.twinx()
    twin.plot(steps, [s.ratio for s in trace.steps], color=PALETTE[3], marker="o")
    twin.set_ylabel("compression ratio")
    fig.tight_layout()
    _save(fig, path)

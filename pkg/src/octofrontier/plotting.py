"""Figures written next to the CSV reports.

Uses the object-oriented ``Figure`` API so nothing touches pyplot's global
state or needs a display.
"""

from __future__ import annotations

import matplotlib as mpl
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
    "savefig.dpi": 150,
}


def _save(fig: Figure, path) -> None:
    FigureCanvasAgg(fig)
    fig.tight_layout()
    fig.savefig(path)


def plot_iteration_metrics(iterations, path) -> None:
    """Frontier sizes and phase timings per planner iteration."""
    with mpl.rc_context(STYLE):
        fig = Figure(figsize=(6.4, 5.0))
        ax_n, ax_t = fig.subplots(2, 1, sharex=True)
        j = [m.iteration for m in iterations]
        for label, attr in (("|F_g|", "n_global"), ("|F_l|", "n_local"),
                            ("|F_exp|", "n_parents"), ("|F_c|", "n_candidates")):
            ax_n.plot(j, [max(getattr(m, attr), 0.5) for m in iterations], marker=".", label=label)
        ax_n.set_yscale("log")
        ax_n.set_ylabel("voxels")
        ax_n.legend(ncol=4, loc="upper right")

        for label, attr in (("octree", "t_octo"), ("detection", "t_detect"),
                            ("clustering", "t_cluster"), ("selection", "t_select"), ("total", "t_total")):
            ax_t.plot(j, [getattr(m, attr) for m in iterations], marker=".", label=label,
                      color="k" if attr == "t_total" else None)
        ax_t.set_xlabel("iteration")
        ax_t.set_ylabel("time [s]")
        ax_t.legend(ncol=3, loc="upper right")
        _save(fig, path)


def plot_volumes(volumes, path) -> None:
    with mpl.rc_context(STYLE):
        fig = Figure(figsize=(6.4, 3.2))
        ax = fig.subplots()
        t = [v.sim_time for v in volumes]
        ax.plot(t, [100 * v.free for v in volumes], label="free")
        ax.plot(t, [100 * v.occ for v in volumes], label="occupied")
        ax.plot(t, [100 * v.unknown for v in volumes], label="unknown")
        ax.set_xlabel("time [s]")
        ax.set_ylabel("volume [%]")
        ax.set_ylim(0, 100)
        ax.legend()
        _save(fig, path)


def plot_bench(rows, fit, path) -> None:
    with mpl.rc_context(STYLE):
        fig = Figure(figsize=(5.0, 3.6))
        ax = fig.subplots()
        n = [r["Fg"] for r in rows]
        for label, key in (("detection", "t_detect"), ("clustering", "t_cluster"),
                           ("selection", "t_select"), ("total", "t_total")):
            ax.plot(n, [r[key] for r in rows], marker="o", label=label)
        lo, hi = min(n), max(n)
        ax.plot([lo, hi], [fit["intercept"] + fit["slope"] * lo, fit["intercept"] + fit["slope"] * hi],
                "k--", label=f"linear fit, R²={fit['r2']:.3f}")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("|F_g|")
        ax.set_ylabel("time [s]")
        ax.legend()
        _save(fig, path)

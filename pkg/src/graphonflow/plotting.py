"""Figure rendering for report and path outputs.

Figures are a byproduct of the CSV data, never the source of truth: every
panel is drawn from the same rows that plot_data.csv carries.  PNG metadata is
stripped so repeated runs produce identical bytes.
"""

from __future__ import annotations

import os
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

_SAVEKW = dict(dpi=120, bbox_inches="tight", metadata={"Software": None})


def _grouped_series(plot_rows):
    series = defaultdict(list)
    for row in plot_rows:
        series[row["series"]].append((row["x"], row["mean"], row["stderr"]))
    return {k: sorted(v) for k, v in series.items()}


def render_report_figures(report, outdir) -> list[str]:
    """One figure per report kind; returns the written paths."""
    if not report.plot_rows:
        return []
    series = _grouped_series(report.plot_rows)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))

    logy = False
    if report.experiment == "theorem13":
        xlabel, title = "n", "snapshot vs realized graphon discrepancy"
        ax.set_xscale("log")
        logy = True
    elif report.experiment == "theorem17":
        xlabel, title = "m", "block densities and successive gaps"
    elif report.experiment == "concentration":
        xlabel, title = "n", "exceedance vs concentration bound"
        logy = True
    else:
        xlabel, title = "s", "moment checks"

    for name, pts in sorted(series.items()):
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        es = [p[2] for p in pts]
        style = "--" if name.startswith(("bound", "oracle")) else "-"
        if any(e > 0 for e in es):
            ax.errorbar(xs, ys, yerr=es, fmt=style, marker="o", capsize=3, label=name)
        else:
            ax.plot(xs, ys, style, marker="o", label=name)
    if logy:
        positive = [r["mean"] for r in report.plot_rows if r["mean"] > 0]
        if positive:
            ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("value")
    ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    path = os.path.join(outdir, f"{report.experiment}.png")
    fig.savefig(path, **_SAVEKW)
    plt.close(fig)
    return [path]


def render_path_figure(paths, outdir, source: str) -> list[str]:
    """Trajectory fan for population paths: every replicate faint, mean bold."""
    if not paths:
        return []
    import numpy as np

    m = paths[0].m
    s = paths[0].sample_times
    freq = np.stack([p.frequencies for p in paths])  # (rep, T, m+1)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    colors = plt.cm.viridis(np.linspace(0, 0.9, m + 1))
    for l in range(m + 1):
        for r in range(freq.shape[0]):
            ax.plot(s, freq[r, :, l], color=colors[l], alpha=min(0.25, 8 / freq.shape[0]),
                    lw=0.8)
        ax.plot(s, freq[:, :, l].mean(axis=0), color=colors[l], lw=2.0,
                label=f"Y_{l} mean")
    ax.set_xlabel("s")
    ax.set_ylabel("type frequency")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(f"{source} type frequencies ({freq.shape[0]} replicates)")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    path = os.path.join(outdir, "path.png")
    fig.savefig(path, **_SAVEKW)
    plt.close(fig)
    return [path]

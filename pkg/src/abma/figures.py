"""Figure rendering for sweep reports.

Draws the per-value summary of a sweep as PNG files next to the CSV:
paired valid/attack curves for efficiency, energy, and lifetime, plus the
complexity growth curve. Uses the Agg backend so reports render headless.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

FIGURE_NAMES = (
    "efficiency.png",
    "energy_consumed.png",
    "battery_lifetime.png",
    "complexity.png",
)

_X_LABELS = {
    "ActiveAppCount": "active apps",
    "Duration": "horizon (ticks)",
    "Connectivity": "connectivity",
}


def _paired_plot(path, xticks, valid, attack, ylabel, xlabel):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    x = range(len(xticks))
    ax.plot(x, valid, marker="o", label="valid apps only")
    ax.plot(x, attack, marker="s", label="with hidden app")
    ax.set_xticks(list(x))
    ax.set_xticklabels([str(v) for v in xticks])
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _single_plot(path, xticks, values, ylabel, xlabel):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    x = range(len(xticks))
    ax.plot(x, values, marker="o", color="tab:red")
    ax.set_xticks(list(x))
    ax.set_xticklabels([str(v) for v in xticks])
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_figures(summary, out_dir) -> list:
    """Render the four standard report figures; returns the file paths."""
    if not summary:
        return []
    variable = summary[0]["variable"]
    xlabel = _X_LABELS.get(variable, variable)
    xticks = [entry["value"] for entry in summary]
    paths = [os.path.join(out_dir, name) for name in FIGURE_NAMES]
    _paired_plot(paths[0], xticks,
                 [e["ee_valid"] for e in summary],
                 [e["ee_attack"] for e in summary],
                 "energy efficiency (data per power)", xlabel)
    _paired_plot(paths[1], xticks,
                 [e["energy_valid"] for e in summary],
                 [e["energy_attack"] for e in summary],
                 "energy consumed (Wh)", xlabel)
    _paired_plot(paths[2], xticks,
                 [e["lifetime_valid"] for e in summary],
                 [e["lifetime_attack"] for e in summary],
                 "remaining battery lifetime (h)", xlabel)
    _single_plot(paths[3], xticks,
                 [e["complexity_pct"] for e in summary],
                 "power growth over clean run (%)", xlabel)
    return paths

"""Figure rendering for run and comparison reports.

Figures are written straight to files (Agg backend); nothing is shown
interactively.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_learning_curve(records, path, title: str = "") -> None:
    """Per-epoch reward curves for one run."""
    fig, ax = plt.subplots(figsize=(8.0, 5.0))
    epochs = [r.epoch for r in records]
    ax.plot(epochs, [r.epoch_return for r in records],
            color="tab:blue", alpha=0.45, label="epoch return")
    ax.plot(epochs, [r.overall_reward for r in records],
            color="tab:blue", linewidth=2.0, label="overall reward")
    ax.plot(epochs, [r.reward_history_100 for r in records],
            color="tab:orange", linewidth=1.5, label="last-100 mean")
    if any(r.eval_return is not None for r in records):
        ax.plot(epochs, [r.eval_return for r in records],
                color="tab:green", linewidth=1.5, linestyle="--",
                label="eval return")
    ax.set_xlabel("epoch")
    ax.set_ylabel("reward")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    if records:
        ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_comparison(result, path, title: str = "",
                    labels: tuple[str, str] = ("a", "b")) -> None:
    """Median learning curves across seeds, with faint per-seed traces."""
    fig, ax = plt.subplots(figsize=(8.0, 5.0))
    colors = {labels[0]: "tab:blue", labels[1]: "tab:red"}
    for label in labels:
        seed_curves = [
            curve for (lb, _), curve in result.curves.items() if lb == label
        ]
        if not seed_curves:
            continue
        shortest = min(len(c) for c in seed_curves)
        stacked = np.array([c[:shortest] for c in seed_curves])
        epochs = np.arange(1, shortest + 1)
        for curve in stacked:
            ax.plot(epochs, curve, color=colors[label], alpha=0.15,
                    linewidth=0.8)
        ax.plot(epochs, np.median(stacked, axis=0), color=colors[label],
                linewidth=2.0,
                label=f"{label} (median aulc {result.median_aulc[label]:.1f})")
    ax.set_xlabel("epoch")
    ax.set_ylabel("epoch return")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)

"""Report figures rendered next to the delimited outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def render_roc_figure(results, path: str | Path) -> None:
    """Per-fold ROC curves on one axis, chance diagonal for reference."""
    fig, ax = plt.subplots(figsize=(6, 5))
    for r in results:
        if not r.roc_points:
            continue
        fpr, tpr = zip(*r.roc_points)
        label = f"fold {r.fold_index}"
        if r.auc is not None:
            label += f" (AUC {r.auc:.3f})"
        ax.plot(fpr, tpr, lw=1.2, label=label)
    ax.plot([0, 1], [0, 1], ls="--", c="gray", lw=1)
    ax.set_xlabel("False positive rate")
    ax.set_ylabel("True positive rate")
    ax.set_title("ROC curves per fold")
    if len(results) <= 12:
        ax.legend(fontsize=7, loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_site_accuracy_figure(per_site, path: str | Path) -> None:
    """Bar chart of held-out-site accuracies for the LOSO protocol."""
    sites = [row["site"] for row in per_site]
    accs = [row["accuracy"] if row["accuracy"] is not None else 0.0
            for row in per_site]
    fig, ax = plt.subplots(figsize=(max(6, 0.5 * len(sites)), 4))
    ax.bar(range(len(sites)), accs, color="steelblue")
    defined = [a for a in accs if a is not None]
    if defined:
        ax.axhline(sum(defined) / len(defined), ls="--", c="darkred", lw=1,
                   label="average")
        ax.legend(fontsize=8)
    ax.set_xticks(range(len(sites)))
    ax.set_xticklabels(sites, rotation=60, ha="right", fontsize=8)
    ax.set_ylabel("Accuracy")
    ax.set_ylim(0, 1)
    ax.set_title("Held-out-site accuracy (LOSO)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)

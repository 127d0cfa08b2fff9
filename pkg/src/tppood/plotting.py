"""Figures for sweep summaries: AUC against delta, one line per statistic."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "3s": dict(color="black", lw=2.0, marker="o"),
    "ks-arrival": dict(color="tab:blue", marker="s"),
    "ks-interevent": dict(color="tab:orange", marker="^"),
    "chi2": dict(color="tab:green", marker="v"),
    "loglik": dict(color="tab:purple", marker="D"),
    "fisher-arrival": dict(color="tab:blue", ls="--", marker="s", mfc="none"),
    "fisher-interevent": dict(color="tab:orange", ls="--", marker="^", mfc="none"),
}


def plot_scenario(summary, scenario, statistics, ax):
    for stat in statistics:
        rows = sorted((r for r in summary if r.scenario == scenario and r.statistic == stat),
                      key=lambda r: r.delta)
        if not rows:
            continue
        x = [r.delta for r in rows]
        y = [r.mean_auc for r in rows]
        err = [r.se_auc for r in rows]
        ax.errorbar(x, y, yerr=err, label=stat, ms=4, capsize=2, **STYLE.get(stat, {}))
    ax.axhline(0.5, color="grey", lw=0.8, ls=":")
    ax.set_ylim(0.0, 1.02)
    ax.set_title(scenario)
    ax.set_xlabel("detectability")
    ax.set_ylabel("ROC AUC")


def plot_sweep(summary, statistics, out_dir) -> list:
    """Write ``auc_<scenario>.png`` for each scenario; returns the paths."""
    scenarios = []
    for r in summary:
        if r.scenario not in scenarios:
            scenarios.append(r.scenario)
    paths = []
    for scenario in scenarios:
        fig, ax = plt.subplots(figsize=(4.5, 3.4))
        plot_scenario(summary, scenario, statistics, ax)
        ax.legend(fontsize=7, loc="lower right")
        fig.tight_layout()
        path = os.path.join(out_dir, f"auc_{scenario}.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths

"""Matplotlib renderings of the report tables.

Each function takes already-aggregated values and writes one PNG next to
the delimited output.  The Agg backend is forced so rendering works
headless, and savefig metadata is pinned so identical runs produce
identical bytes.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def _save(fig, path: str | Path) -> None:
    fig.savefig(path, dpi=120, metadata={"Software": "barn"})
    plt.close(fig)


def relative_rmse_box(values_by_method: dict[str, list[float]], path: str | Path) -> None:
    """Box plot of per-trial relative test RMSE, one box per method."""
    methods = list(values_by_method)
    data = [
        [v for v in values_by_method[m] if math.isfinite(v)] or [math.nan] for m in methods
    ]
    fig, ax = plt.subplots(figsize=(1.4 * max(4, len(methods)), 4.2))
    ax.boxplot(data, tick_labels=methods)
    ax.axhline(1.0, color="gray", lw=0.8, ls="--")
    ax.set_ylabel("relative test RMSE")
    ax.set_title("Test RMSE relative to the best method per split")
    fig.tight_layout()
    _save(fig, path)


def r2_bars(
    means: dict[str, dict[str, float]],
    spreads: dict[str, dict[str, float]],
    path: str | Path,
) -> None:
    """Grouped train/test R^2 bars with pooled-spread error bars."""
    methods = list(means)
    x = range(len(methods))
    width = 0.38
    fig, ax = plt.subplots(figsize=(1.4 * max(4, len(methods)), 4.2))
    for i, split_name in enumerate(("train", "test")):
        vals = [means[m].get(split_name, math.nan) for m in methods]
        errs = [spreads[m].get(split_name, 0.0) for m in methods]
        ax.bar(
            [xi + (i - 0.5) * width for xi in x],
            vals,
            width,
            yerr=errs,
            capsize=3,
            label=split_name,
        )
    ax.set_xticks(list(x))
    ax.set_xticklabels(methods)
    ax.set_ylabel("$R^2$")
    ax.set_title("Fit quality with pooled-variation error bars")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def neuron_posterior_hist(
    counts: dict[int, int], prior: dict[int, float] | None, path: str | Path
) -> None:
    """Histogram of sampled hidden sizes, with the size prior overlaid."""
    sizes = sorted(counts)
    total = sum(counts.values()) or 1
    fig, ax = plt.subplots(figsize=(6, 4.2))
    ax.bar(sizes, [counts[s] / total for s in sizes], width=0.8, label="sampled")
    if prior:
        ps = sorted(prior)
        ax.plot(ps, [prior[s] for s in ps], "o--", color="black", label="size prior")
    ax.set_xlabel("hidden neurons per network")
    ax.set_ylabel("fraction of samples")
    ax.set_title("Posterior of hidden-layer sizes")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def phi_trace_plot(phi: list[float], path: str | Path) -> None:
    """Validation RMSE of the ensemble against sampler iteration."""
    fig, ax = plt.subplots(figsize=(6, 4.2))
    ax.plot(range(1, len(phi) + 1), phi, marker=".", lw=1.0)
    ax.set_xlabel("iteration")
    ax.set_ylabel("validation RMSE")
    ax.set_title("Ensemble error during sampling")
    fig.tight_layout()
    _save(fig, path)

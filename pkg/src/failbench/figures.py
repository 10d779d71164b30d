"""SVG figures for the two studies and for failure-aware boxplots.

matplotlib is imported lazily with the Agg backend so that importing the
package never needs a display.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Sequence

from .core import FailbenchError, ResultTable

SHORT = {"Fisher": "Fis", "Midp": "Mid", "Small": "Sma", "Woolf": "Woo",
         "Manual": "Man", "Haldane": "+0.5"}
FAILURE_OFFSET = 0.05


class FigureError(FailbenchError, RuntimeError):
    pass


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # stable ids and no timestamp so reruns give identical files
    plt.rcParams["svg.hashsalt"] = "failbench"
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except Exception as exc:  # noqa: BLE001
        raise FigureError(f"could not render {path.name}: {exc}") from exc
    finally:
        _plt().close(fig)
    return path


def short_label(label: str) -> str:
    return "/".join(SHORT.get(p, p) for p in label.split("/"))


def rank_panels(scenario_labels: Sequence[str], ranks_single: Sequence[Mapping[str, int]],
                ranks_all: Sequence[Mapping[str, int]],
                ranks_pipelines: Sequence[Mapping[str, int]],
                out_dir: str | Path) -> list[Path]:
    """Panel A (Single vs All slopes) and panel B (pipeline ranks), one column per scenario."""
    plt = _plt()
    n = len(scenario_labels)
    out_dir = Path(out_dir)
    paths = []

    fig, axes = plt.subplots(1, n, figsize=(2.0 * n, 3.6), sharey=True, squeeze=False)
    n_methods = max((len(r) for r in ranks_single), default=1)
    for j, ax in enumerate(axes[0]):
        ax.set_gid(f"panelA-scenario-{j + 1}")
        rs, ra = ranks_single[j], ranks_all[j]
        for m in sorted(set(rs) & set(ra)):
            ax.plot([0, 1], [rs[m], ra[m]], marker="o")
            ax.annotate(SHORT.get(m, m), (1, ra[m]), xytext=(4, 0),
                        textcoords="offset points", va="center", fontsize=7)
        ax.set_xticks([0, 1], ["Single", "All"])
        ax.set_xlim(-0.3, 1.6)
        ax.set_ylim(n_methods + 0.5, 0.5)
        ax.set_title(scenario_labels[j], fontsize=7)
    axes[0][0].set_ylabel("rank (log-scale bias)")
    fig.suptitle("A: discarding data sets for failing methods (Single) vs all methods (All)",
                 fontsize=9)
    fig.tight_layout()
    paths.append(_save(fig, out_dir / "or_ranks_panel_A.svg"))

    fig, axes = plt.subplots(1, n, figsize=(2.0 * n, 4.2), sharey=True, squeeze=False)
    n_pipes = max((len(r) for r in ranks_pipelines), default=1)
    for j, ax in enumerate(axes[0]):
        ax.set_gid(f"panelB-scenario-{j + 1}")
        rp = ranks_pipelines[j]
        for m, r in sorted(rp.items(), key=lambda kv: (kv[1], kv[0])):
            ax.scatter([0], [r], s=14)
            ax.annotate(short_label(m), (0, r), xytext=(5, 0), textcoords="offset points",
                        va="center", fontsize=6)
        ax.set_xticks([])
        ax.set_xlim(-0.2, 1.2)
        ax.set_ylim(n_pipes + 0.5, 0.5)
        ax.set_title(scenario_labels[j], fontsize=7)
    axes[0][0].set_ylabel("rank (log-scale bias)")
    fig.suptitle("B: ranks after applying fallback pipelines (m1/m2)", fontsize=9)
    fig.tight_layout()
    paths.append(_save(fig, out_dir / "or_ranks_panel_B.svg"))
    return paths


def coverage_bars(coverage: Mapping[str, Mapping[str, float]], handlings: Sequence[str],
                  labels: Mapping[str, str], path: str | Path, level: float = 0.95) -> Path:
    """Grouped bars: one group per handling, one bar per interval method."""
    plt = _plt()
    methods = list(coverage)
    fig, ax = plt.subplots(figsize=(7.0, 3.6))
    width = 0.8 / max(len(methods), 1)
    for i, m in enumerate(methods):
        xs = [g + (i - (len(methods) - 1) / 2) * width for g in range(len(handlings))]
        ys = [coverage[m][h] for h in handlings]
        bars = ax.bar(xs, ys, width, label=m)
        for h, patch in zip(handlings, bars.patches):
            patch.set_gid(f"coverage-{m}-{h}")
    ax.axhline(level, color="grey", linestyle="--", linewidth=0.8)
    ax.set_xticks(range(len(handlings)), [labels.get(h, h) for h in handlings], fontsize=7)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("empirical coverage")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def failure_boxplot(table: ResultTable, path: str | Path, *, transform=None,
                    offset: float = FAILURE_OFFSET) -> Path:
    """Boxplot of successful values per method; failures as contrasting scatters.

    Failures are drawn ``offset`` of the value range above the largest
    observed value, so they never sit inside the data range.
    """
    plt = _plt()
    methods = list(table.methods)
    data = []
    for m in methods:
        vals = [c.value for c in table.column(m) if c.ok]
        data.append([transform(v) for v in vals] if transform else vals)
    finite = [v for col in data for v in col if math.isfinite(v)]
    lo, hi = (min(finite), max(finite)) if finite else (0.0, 1.0)
    y_fail = hi + offset * ((hi - lo) or 1.0)
    fig, ax = plt.subplots(figsize=(1.2 * len(methods) + 2, 3.6))
    ax.boxplot([d if d else [math.nan] for d in data])
    ax.set_xticks(range(1, len(methods) + 1), methods, fontsize=7)
    for i, m in enumerate(methods, start=1):
        n_fail = sum(1 for c in table.column(m) if not c.ok)
        if n_fail:
            pts = ax.scatter([i] * n_fail, [y_fail] * n_fail, color="red", marker="x",
                             zorder=3)
            pts.set_gid(f"failures-{m}")
    ax.set_ylabel(table.measure)
    fig.tight_layout()
    return _save(fig, path)

"""Optional static SVG rendering of the aggregate reports.

Requires matplotlib (the ``plots`` extra); everything here is presentation
only and never needed for the benchmark itself.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .analysis import category_max, complete_records, critical_difference, rank_detectors

__all__ = ["render_svg_reports"]


def _require_matplotlib():
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise RuntimeError("SVG plots need matplotlib (install the 'plots' extra)") from exc
    return plt


def _cd_plot(plt, result, path: Path) -> None:
    order = sorted(result.mean_ranks, key=result.mean_ranks.get)
    ranks = [result.mean_ranks[n] for n in order]
    fig, ax = plt.subplots(figsize=(7, 0.5 + 0.35 * len(order)))
    y = np.arange(len(order))[::-1]
    ax.scatter(ranks, y, zorder=3)
    for name, rank, yy in zip(order, ranks, y):
        ax.annotate(f" {name} ({rank:.2f})", (rank, yy), va="center", fontsize=9)
    for i, group in enumerate(g for g in result.groups if len(g) > 1):
        lo = min(result.mean_ranks[n] for n in group)
        hi = max(result.mean_ranks[n] for n in group)
        ax.plot([lo, hi], [len(order) + 0.4 + 0.25 * i] * 2, lw=3, color="black")
    ax.set_xlabel(f"average rank (CD = {result.critical_distance:.3f})")
    ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


def _category_plot(plt, rows, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    groups: dict[tuple, list] = {}
    for row in rows:
        key = (row["scenario"], row["n_train_nominal"], row["category"])
        groups.setdefault(key, []).append(row)
    for (scenario, size, category), entries in sorted(groups.items()):
        entries = sorted(entries, key=lambda r: r["anomaly_count"])
        xs = [r["anomaly_count"] for r in entries]
        ys = [100 * r["mean_max_aucroc"] for r in entries]
        ax.plot(xs, ys, marker="o", label=f"{scenario} n={size} {category}")
    ax.set_xlabel("faulty training examples")
    ax.set_ylabel("mean max AUCROC (%)")
    ax.axhline(98.0, color="black", ls="--", lw=0.8)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


def render_svg_reports(records, out_dir, which: str = "all") -> list[Path]:
    """Render cd.svg and/or category_max.svg next to the CSV artifacts."""
    plt = _require_matplotlib()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    complete = complete_records(records)

    if which in ("all", "cd") and len(complete) >= 10:
        table = rank_detectors(records)
        stacked = np.vstack([table.matrices[g] for g in table.groups])
        result = critical_difference(stacked, table.detectors)
        path = out_dir / "cd.svg"
        _cd_plot(plt, result, path)
        written.append(path)

    if which in ("all", "category-max") and any(r["anomaly_mode"] == "count" for r in complete):
        rows = category_max(records)
        path = out_dir / "category_max.svg"
        _category_plot(plt, rows, path)
        written.append(path)

    return written

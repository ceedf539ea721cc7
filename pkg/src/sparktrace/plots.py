"""Campaign figures, rendered off-screen to PNG files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

COVERAGE_LINE = 75.0


def coverage_curve(percents: list[float], path: Path) -> Path:
    """Library coverage sorted in ascending order, with the 75% reference line."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ys = sorted(percents)
    ax.plot(range(1, len(ys) + 1), ys, marker="o", linewidth=1)
    ax.axhline(COVERAGE_LINE, color="tab:red", linestyle="--", linewidth=1)
    ax.set_xlabel("library (sorted by coverage)")
    ax.set_ylabel("statement coverage (%)")
    ax.set_ylim(0, 105)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def coverage_histogram(percents: list[float], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.hist(percents, bins=range(0, 110, 10), edgecolor="black")
    ax.set_xlabel("statement coverage (%)")
    ax.set_ylabel("libraries")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def iteration_times(labels: list[str], means_ms: list[float], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, max(3.0, 0.22 * len(labels) + 1)))
    ax.barh(range(len(labels)), means_ms)
    ax.set_yticks(range(len(labels)), labels, fontsize=7)
    ax.set_xlabel("mean iteration time (ms)")
    ax.invert_yaxis()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_summary(summary: dict, report: list[dict], out_dir: Path) -> list[Path]:
    """Figures from the ``summary.json`` and ``report.json`` contents."""
    out_dir = Path(out_dir)
    percents = [lib["coveragePercent"] for lib in summary["libraries"] if lib["error"] is None]
    labels = [f"{e['library']}/{e['function']}" for e in report]
    means = [e["meanIterationMs"] for e in report]
    return [coverage_curve(percents, out_dir / "coverage_sorted.png"),
            coverage_histogram(percents, out_dir / "coverage_hist.png"),
            iteration_times(labels, means, out_dir / "iteration_ms.png")]


def render_campaign(campaign, out_dir: Path) -> list[Path]:
    return render_summary(campaign.summary(), campaign.report(), out_dir)

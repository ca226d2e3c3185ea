"""Analyst reports: tab-delimited tables with rendered figures alongside.

Every writer emits a .tsv and a matching .png into the same directory
and returns both paths, so report output is both greppable and
presentable without re-running anything.
"""

from __future__ import annotations

from collections import Counter
from pathlib import Path
from typing import Iterable, Optional, Sequence

import matplotlib

matplotlib.use("Agg")  # render to files; no display server here
import matplotlib.pyplot as plt

from .mining import CriticalStats, LengthStats, PatternCatalog, SimilarityReport
from .types import Alert


def _finish(fig, png: Path) -> None:
    fig.tight_layout()
    fig.savefig(png, dpi=120)
    plt.close(fig)


def write_similarity_report(report: SimilarityReport, out_dir: Path | str) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tsv, png = out / "similarity_cdf.tsv", out / "similarity_cdf.png"

    lines = ["threshold\tfraction"]
    for threshold, fraction in report.cdf_points:
        lines.append(f"{threshold:.6f}\t{fraction:.6f}")
    tsv.write_text("\n".join(lines) + "\n", encoding="utf-8")

    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [t for t, _ in report.cdf_points]
    ys = [f for _, f in report.cdf_points]
    ax.step(xs, ys, where="post")
    ax.set_xlabel("pairwise similarity")
    ax.set_ylabel("fraction of incident pairs")
    ax.set_title("Incident similarity CDF")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.grid(True, alpha=0.3)
    _finish(fig, png)
    return tsv, png


def write_length_report(stats: LengthStats, out_dir: Path | str) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tsv, png = out / "length_histogram.tsv", out / "length_histogram.png"

    lines = ["length\tcount"]
    for length in sorted(stats.counts):
        lines.append(f"{length}\t{stats.counts[length]}")
    tsv.write_text("\n".join(lines) + "\n", encoding="utf-8")

    fig, ax = plt.subplots(figsize=(6, 4))
    lengths = sorted(stats.counts)
    ax.bar(lengths, [stats.counts[n] for n in lengths])
    ax.set_xlabel("pattern length (alerts)")
    ax.set_ylabel("patterns")
    ax.set_title(f"Mined pattern lengths (short fraction {stats.short_fraction:.2f})")
    _finish(fig, png)
    return tsv, png


def write_critical_report(stats: CriticalStats, out_dir: Path | str) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tsv, png = out / "critical_alerts.tsv", out / "critical_alerts.png"

    lines = [
        "metric\tvalue",
        f"unique_critical\t{stats.unique_critical}",
        f"total_occurrences\t{stats.total_occurrences}",
    ]
    positions = [p for p in stats.first_positions.values() if p is not None]
    lines.append(f"incidents_with_critical\t{len(positions)}")
    tsv.write_text("\n".join(lines) + "\n", encoding="utf-8")

    fig, ax = plt.subplots(figsize=(6, 4))
    if positions:
        ax.hist(positions, bins=range(0, max(positions) + 2), align="left")
    ax.set_xlabel("position of first critical alert in incident")
    ax.set_ylabel("incidents")
    ax.set_title("When critical alerts appear")
    _finish(fig, png)
    return tsv, png


def write_volume_report(alerts: Sequence[Alert], out_dir: Path | str) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tsv, png = out / "alert_volume.tsv", out / "alert_volume.png"

    by_symbol = Counter(a.symbol.name for a in alerts)
    severity_of = {a.symbol.name: a.symbol.severity.value for a in alerts}
    total = len(alerts) or 1
    lines = ["symbol\tseverity\tcount\tfraction"]
    for name, count in sorted(by_symbol.items(), key=lambda kv: (-kv[1], kv[0])):
        lines.append(f"{name}\t{severity_of[name]}\t{count}\t{count / total:.6f}")
    tsv.write_text("\n".join(lines) + "\n", encoding="utf-8")

    fig, ax = plt.subplots(figsize=(7, 0.4 * max(len(by_symbol), 4) + 1.5))
    names = [n for n, _ in sorted(by_symbol.items(), key=lambda kv: kv[1])]
    ax.barh(names, [by_symbol[n] for n in names])
    ax.set_xlabel("alerts")
    ax.set_title(f"Alert volume by type ({len(alerts)} total)")
    _finish(fig, png)
    return tsv, png


def write_catalog(catalog: PatternCatalog, path: Path | str) -> Path:
    """catalog.tsv: id, length, occurrence_count, symbols (comma-joined)."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = ["id\tlength\toccurrence_count\tsymbols"]
    for p in catalog.patterns:
        lines.append(f"{p.id}\t{len(p.symbols)}\t{p.occurrence_count}\t{','.join(p.symbols)}")
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out

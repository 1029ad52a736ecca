"""Report files: delimited text plus rendered figures.

The CLI's report path always writes machine-readable text (key:value
summaries, JSON, TSV rank tables, epoch logs) and, unless disabled, renders
matplotlib figures next to them.  Figures are written with the Agg backend so
everything works headless.
"""

from __future__ import annotations

import json
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import RankReport
from .training import EpochStats


def format_epoch_line(entry: EpochStats) -> str:
    """Fixed field order for scripted parsing: epoch, loss, optional val_mrr."""
    line = f"epoch={entry.epoch} loss={entry.loss:.17g}"
    if entry.val_mrr is not None:
        line += f" val_mrr={entry.val_mrr:.17g}"
    return line


def write_epoch_log(log: list[EpochStats], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for entry in log:
            handle.write(format_epoch_line(entry) + "\n")


def parse_epoch_log(path: str) -> list[EpochStats]:
    entries = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            fields = dict(part.split("=", 1) for part in line.split())
            entries.append(
                EpochStats(
                    epoch=int(fields["epoch"]),
                    loss=float(fields["loss"]),
                    val_mrr=float(fields["val_mrr"]) if "val_mrr" in fields else None,
                )
            )
    return entries


def _save(fig, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_training_figures(log: list[EpochStats], out_dir: str) -> list[str]:
    """Loss curve (and validation MRR when logged); returns written paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    epochs = [e.epoch for e in log]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, [e.loss for e in log], color="tab:blue", lw=1.5)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean batch loss")
    ax.grid(True, alpha=0.3)
    probes = [(e.epoch, e.val_mrr) for e in log if e.val_mrr is not None]
    if probes:
        twin = ax.twinx()
        twin.plot(*zip(*probes), color="tab:red", lw=1.5, ls="--")
        twin.set_ylabel("validation MRR", color="tab:red")
        twin.set_ylim(0, 1)
    path = os.path.join(out_dir, "loss_curve.png")
    _save(fig, path)
    written.append(path)
    return written


def render_rank_figures(report: RankReport, out_dir: str) -> list[str]:
    """Hits@k bars and a rank histogram; returns written paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    fig, ax = plt.subplots(figsize=(5, 4))
    ks = sorted(report.hits)
    ax.bar([str(k) for k in ks], [report.hits[k] for k in ks], color="tab:blue")
    ax.set_xlabel("k")
    ax.set_ylabel("hits@k")
    ax.set_ylim(0, 1)
    ax.axhline(report.mrr, color="tab:red", ls="--", lw=1, label=f"MRR = {report.mrr:.3f}")
    ax.legend()
    path = os.path.join(out_dir, "hits_at_k.png")
    _save(fig, path)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5, 4))
    ranks = list(report.ranks)
    bins = min(50, max(ranks))
    ax.hist(ranks, bins=bins, color="tab:gray")
    ax.set_xlabel("rank of true entity")
    ax.set_ylabel("queries")
    ax.set_yscale("log" if len(ranks) > 50 else "linear")
    path = os.path.join(out_dir, "rank_histogram.png")
    _save(fig, path)
    written.append(path)
    return written


def write_rank_report(
    report: RankReport,
    out_dir: str,
    query_rows: list[tuple[str, int, int]] | None = None,
    extra: dict | None = None,
    figures: bool = True,
) -> list[str]:
    """Write report.txt, report.json, ranks.tsv, and (optionally) figures.

    ``query_rows`` holds (serialized fact, position, rank) per query in
    report order; ``extra`` is merged into the JSON document (config echo,
    wall time).
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    path = os.path.join(out_dir, "report.txt")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(report.to_text() + "\n")
    written.append(path)

    document = dict(extra or {})
    document.update(report.to_dict())
    path = os.path.join(out_dir, "report.json")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(document, handle, indent=2, sort_keys=True)
        handle.write("\n")
    written.append(path)

    if query_rows is not None:
        path = os.path.join(out_dir, "ranks.tsv")
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write("fact\tposition\trank\n")
            for fact_text, position, rank in query_rows:
                handle.write(f"{fact_text}\t{position}\t{rank}\n")
        written.append(path)

    if figures:
        written.extend(render_rank_figures(report, out_dir))
    return written

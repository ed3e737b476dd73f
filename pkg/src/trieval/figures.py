"""Figure rendering for evaluation reports and bank statistics.

Figures are written next to the delimited/JSON outputs of the report
commands; the Agg backend keeps everything headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .bank import DocIdBank
from .evaluation import MetricsReport


def save_metrics_figure(report: MetricsReport, path: str | Path) -> Path:
    """Bar chart of the three retrieval metrics, annotated with values."""
    labels = ["Recall@1", "Recall@10", "MRR@100"]
    values = [report.recall_at_1, report.recall_at_10, report.mrr_at_100]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    bars = ax.bar(labels, values, color=["#4c72b0", "#55a868", "#c44e52"])
    for bar, value in zip(bars, values):
        ax.annotate(
            f"{value:.3f}",
            (bar.get_x() + bar.get_width() / 2, value),
            ha="center",
            va="bottom",
            fontsize=9,
        )
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    ax.set_title(f"retrieval quality over {report.n_queries} queries")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def save_bank_figure(bank: DocIdBank, path: str | Path) -> Path:
    """Histograms of docids per document and docid token lengths."""
    per_doc = [len(ids) for ids in bank.by_doc.values()] or [0]
    lengths = [len(tokens) for _, _, tokens in bank.entries()] or [0]
    fig, (left, right) = plt.subplots(1, 2, figsize=(8, 3.5))
    left.hist(per_doc, bins=range(1, max(per_doc) + 2), color="#4c72b0", rwidth=0.9, align="left")
    left.set_xlabel("docids per document")
    left.set_ylabel("documents")
    right.hist(lengths, bins=range(1, max(lengths) + 2), color="#55a868", rwidth=0.9, align="left")
    right.set_xlabel("docid length (tokens)")
    right.set_ylabel("docids")
    fig.suptitle(f"{len(bank.by_doc)} documents, {len(bank.by_docid)} docids")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)

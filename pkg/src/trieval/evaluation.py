"""Recall@k and MRR@k over run results and relevance judgments.

Query ids appearing in a run but not in the qrels are an error; qrels
queries missing from the run count as zeros rather than being dropped, so
thin runs cannot silently inflate the metrics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import FormatError, MissingQrels
from .retriever import RunResult, read_run_file

Qrels = dict[str, set[str]]


@dataclass
class MetricsReport:
    recall_at_1: float
    recall_at_10: float
    mrr_at_100: float
    n_queries: int

    def as_dict(self) -> dict:
        return {
            "recall_at_1": self.recall_at_1,
            "recall_at_10": self.recall_at_10,
            "mrr_at_100": self.mrr_at_100,
            "n_queries": self.n_queries,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def _check_run(run: list[RunResult], qrels: Qrels) -> dict[str, RunResult]:
    by_qid = {}
    for result in run:
        if result.query_id not in qrels:
            raise MissingQrels(result.query_id)
        by_qid[result.query_id] = result
    return by_qid


def recall_at_k(run: list[RunResult], qrels: Qrels, k: int) -> float:
    """Fraction of qrels queries with a relevant doc in the top k."""
    if not qrels:
        raise ValueError("qrels are empty")
    by_qid = _check_run(run, qrels)
    hits = 0
    for qid, relevant in qrels.items():
        result = by_qid.get(qid)
        if result and any(doc.doc_ref in relevant for doc in result.ranked[:k]):
            hits += 1
    return hits / len(qrels)


def mrr_at_k(run: list[RunResult], qrels: Qrels, k: int = 100) -> float:
    """Mean reciprocal rank of the first relevant doc within the top k."""
    if not qrels:
        raise ValueError("qrels are empty")
    by_qid = _check_run(run, qrels)
    total = 0.0
    for qid, relevant in qrels.items():
        result = by_qid.get(qid)
        if not result:
            continue
        for position, doc in enumerate(result.ranked[:k], start=1):
            if doc.doc_ref in relevant:
                total += 1.0 / position
                break
    return total / len(qrels)


def evaluate(run: list[RunResult], qrels: Qrels) -> MetricsReport:
    return MetricsReport(
        recall_at_1=recall_at_k(run, qrels, 1),
        recall_at_10=recall_at_k(run, qrels, 10),
        mrr_at_100=mrr_at_k(run, qrels, 100),
        n_queries=len(qrels),
    )


def evaluate_run(run_path: str | Path, qrels_path: str | Path) -> MetricsReport:
    qrels = load_qrels(qrels_path)
    run = read_run_file(run_path)
    return evaluate(run, qrels)


# -- file formats ---------------------------------------------------------


def load_qrels(path: str | Path) -> Qrels:
    """TSV judgments: query_id TAB doc_ref, one pair per line."""
    qrels: Qrels = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not all(parts):
                raise FormatError(f"{path}:{lineno}: expected 'query_id<TAB>doc_ref'")
            qid, doc_ref = parts
            qrels.setdefault(qid, set()).add(doc_ref)
    if not qrels:
        raise FormatError(f"{path}: no judgments found")
    return qrels


def load_queries(path: str | Path) -> list[tuple[str, str]]:
    """TSV queries: query_id TAB query_text, one per line."""
    queries = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not all(parts):
                raise FormatError(f"{path}:{lineno}: expected 'query_id<TAB>query_text'")
            qid, text = parts
            if qid in seen:
                raise FormatError(f"{path}:{lineno}: duplicate query id {qid!r}")
            seen.add(qid)
            queries.append((qid, text))
    return queries

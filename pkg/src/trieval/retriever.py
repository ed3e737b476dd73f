"""Query to ranked documents: decode docids, map them back, aggregate.

Several docids of one document can appear in the same beam; the document
takes the score of its best docid (or the log-sum of all of them with
``aggregate="sum"``) and duplicates are dropped before ranking.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .bank import DocIdBank
from .decoder import DecodeConfig, constrained_beam_search
from .errors import FormatError
from .lm import LmProvider, logsumexp
from .prompts import PromptTemplate

DEFAULT_RUN_TAG = "trieval"


@dataclass
class RankedDoc:
    doc_ref: str
    score: float
    best_docid: str
    rank: int


@dataclass
class RunResult:
    query_id: str
    ranked: list[RankedDoc]


def retrieve(
    provider: LmProvider,
    bank: DocIdBank,
    template: PromptTemplate | None,
    query_id: str,
    query_text: str,
    k: int,
    cfg: DecodeConfig,
    aggregate: str = "max",
) -> RunResult:
    """Top-k documents for one query.

    The decoder runs at beam width max(k, cfg.beam_width) so aggregation
    collapsing several docids into one document cannot starve the top-k.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if aggregate not in ("max", "sum"):
        raise ValueError(f"unsupported aggregate mode: {aggregate!r}")
    decode_cfg = replace(cfg, beam_width=max(k, cfg.beam_width))
    hypotheses = constrained_beam_search(provider, bank, template, query_text, decode_cfg)

    order: list[str] = []
    best: dict[str, tuple[float, str]] = {}
    scores: dict[str, list[float]] = {}
    for hyp in hypotheses:
        found = bank.terminal_at(list(hyp.tokens))
        if found is None:  # pragma: no cover - decoding guarantees membership
            raise AssertionError("decoder returned a hypothesis outside the bank")
        docid_text, doc_ref = found
        if doc_ref not in best:
            order.append(doc_ref)
            best[doc_ref] = (hyp.score, docid_text)
        scores.setdefault(doc_ref, []).append(hyp.score)

    if aggregate == "max":
        pairs = [(best[d][0], i) for i, d in enumerate(order)]
    else:
        pairs = [(logsumexp(scores[d]), i) for i, d in enumerate(order)]
    ranking = sorted(range(len(order)), key=lambda i: (-pairs[i][0], pairs[i][1]))

    ranked = [
        RankedDoc(order[i], pairs[i][0], best[order[i]][1], rank)
        for rank, i in enumerate(ranking[:k], start=1)
    ]
    return RunResult(query_id, ranked)


def retrieve_batch(
    provider: LmProvider,
    bank: DocIdBank,
    template: PromptTemplate | None,
    queries: list[tuple[str, str]],
    k: int,
    cfg: DecodeConfig,
    workers: int = 1,
    aggregate: str = "max",
) -> list[RunResult]:
    """Retrieve for (query_id, query_text) pairs; results keep input order."""

    def work(pair):
        qid, text = pair
        return retrieve(provider, bank, template, qid, text, k, cfg, aggregate)

    if workers <= 1:
        return [work(pair) for pair in queries]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(work, queries))


# -- run file format (TREC style) ----------------------------------------


def write_run_file(path: str | Path, results: list[RunResult], run_tag: str = DEFAULT_RUN_TAG) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for result in results:
            for doc in result.ranked:
                fh.write(
                    f"{result.query_id} Q0 {doc.doc_ref} {doc.rank} {doc.score:.6f} {run_tag}\n"
                )


def read_run_file(path: str | Path) -> list[RunResult]:
    """Parse a TREC-style run file back into per-query results."""
    per_query: dict[str, list[RankedDoc]] = {}
    order: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 6:
                raise FormatError(f"{path}:{lineno}: expected 6 whitespace-separated fields")
            qid, _, doc_ref, rank, score, _ = parts
            try:
                ranked_doc = RankedDoc(doc_ref, float(score), "", int(rank))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: bad rank or score: {exc}") from exc
            if qid not in per_query:
                per_query[qid] = []
                order.append(qid)
            per_query[qid].append(ranked_doc)
    results = []
    for qid in order:
        docs = sorted(per_query[qid], key=lambda d: d.rank)
        if len({d.doc_ref for d in docs}) != len(docs):
            raise FormatError(f"{path}: duplicate doc_ref for query {qid!r}")
        results.append(RunResult(qid, docs))
    return results

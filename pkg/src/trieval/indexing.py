"""Indexing pipeline: mint several docids per document and fill the bank.

Each document gets n pseudo queries (from a file, or generated with a
few-shot prompt as fallback); every pseudo query is fed through the
demonstration prompt and the greedy generation becomes one docid candidate.
Diversity comes from the n distinct pseudo queries, not from sampling.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .bank import CollisionReport, DocIdBank, DocIdEntry, InsertStatus
from .errors import EmptyGeneration, FormatError, GenerationError, IndexingFailed
from .lm import LmProvider, PromptContext
from .prompts import DEFAULT_INDEX_TEMPLATE, DEFAULT_QUERY_GEN_TEMPLATE, PromptTemplate, build_prompt
from .tokens import docid_text_of

log = logging.getLogger(__name__)

#: cap on document text characters pasted into the query-generation prompt
DOC_TEXT_PROMPT_LIMIT = 1000

#: token budget for one generated pseudo query
PSEUDO_QUERY_MAX_TOKENS = 30


@dataclass
class Document:
    doc_ref: str
    text: str


@dataclass
class PseudoQuery:
    doc_ref: str
    text: str
    index: int = 1


PseudoQuerySource = Callable[[Document], "list[PseudoQuery]"]


@dataclass
class IndexingConfig:
    n_docids_per_doc: int = 10
    min_docid_tokens: int = 3
    max_docid_tokens: int = 15
    #: extra indexing rounds granted to documents that lost every docid to collisions
    regeneration_rounds: int = 1

    def validate(self) -> None:
        if self.n_docids_per_doc < 1:
            raise ValueError("n_docids_per_doc must be >= 1")
        if not 1 <= self.min_docid_tokens <= self.max_docid_tokens:
            raise ValueError("need 1 <= min_docid_tokens <= max_docid_tokens")
        if self.regeneration_rounds < 0:
            raise ValueError("regeneration_rounds must be >= 0")


@dataclass
class IndexingStats:
    documents: int = 0
    docids_generated: int = 0
    docids_kept: int = 0
    duplicates_within_doc: int = 0
    generation_failures: int = 0
    collisions_removed: int = 0
    orphans_remaining: list[str] = field(default_factory=list)
    failed_documents: list[str] = field(default_factory=list)
    regeneration_rounds_used: int = 0

    def as_dict(self) -> dict:
        return {
            "documents": self.documents,
            "docids_generated": self.docids_generated,
            "docids_kept": self.docids_kept,
            "duplicates_within_doc": self.duplicates_within_doc,
            "generation_failures": self.generation_failures,
            "collisions_removed": self.collisions_removed,
            "orphans_remaining": list(self.orphans_remaining),
            "failed_documents": list(self.failed_documents),
            "regeneration_rounds_used": self.regeneration_rounds_used,
        }


def generate_docid(
    provider: LmProvider,
    template: PromptTemplate | None,
    pseudo_query: PseudoQuery,
    cfg: IndexingConfig,
) -> DocIdEntry:
    """Prompt the LM with one pseudo query and turn the completion into a docid.

    Generation stops at the space's end token (one-line completion); the
    token window [min, max] is enforced by masking during generation and by
    trimming whitespace-only edge tokens afterwards.
    """
    cfg.validate()
    space = provider.token_space
    if space is None:
        raise ValueError("provider has no token space; cannot decode docids")
    prompt = build_prompt(template or DEFAULT_INDEX_TEMPLATE, pseudo_query.text)
    tokens = provider.generate_greedy(
        PromptContext(prompt),
        min_tokens=cfg.min_docid_tokens,
        max_tokens=cfg.max_docid_tokens,
        stop_token=space.end_id,
    )
    while tokens and not space.token_text(tokens[0]).strip():
        tokens.pop(0)
    while tokens and not space.token_text(tokens[-1]).strip():
        tokens.pop()
    text = docid_text_of(space, tokens)
    if not text:
        raise EmptyGeneration(f"docid generation for {pseudo_query.doc_ref!r} was all whitespace")
    if len(tokens) < cfg.min_docid_tokens:
        raise GenerationError(
            f"docid for {pseudo_query.doc_ref!r} shrank below {cfg.min_docid_tokens} tokens after trimming"
        )
    return DocIdEntry(text, tokens, pseudo_query.doc_ref, origin=pseudo_query.index)


def pad_pseudo_queries(queries: list[PseudoQuery], n: int) -> list[PseudoQuery]:
    """Bring the list to exactly n queries, cycling with an ordinal hint.

    Repeats get " (aspect k)" appended so the LM still sees distinct inputs.
    """
    if not queries:
        raise ValueError("need at least one pseudo query")
    out = []
    for i in range(n):
        base = queries[i % len(queries)]
        round_no = i // len(queries) + 1
        text = base.text if round_no == 1 else f"{base.text} (aspect {round_no})"
        out.append(PseudoQuery(base.doc_ref, text, index=i + 1))
    return out


def index_document(
    provider: LmProvider,
    template: PromptTemplate | None,
    doc: Document,
    pseudo_queries: list[PseudoQuery],
    cfg: IndexingConfig,
) -> list[DocIdEntry]:
    """Mint up to n docids for one document, deduplicated within the document."""
    entries, _, failures = _collect_docids(provider, template, doc, pseudo_queries, cfg)
    if not entries:
        raise IndexingFailed(
            f"every docid generation failed for document {doc.doc_ref!r}: {failures}"
        )
    return entries


def _collect_docids(provider, template, doc, pseudo_queries, cfg):
    cfg.validate()
    for pq in pseudo_queries:
        if pq.doc_ref != doc.doc_ref:
            raise ValueError(f"pseudo query for {pq.doc_ref!r} passed to document {doc.doc_ref!r}")
    entries: list[DocIdEntry] = []
    seen: set[str] = set()
    failures: list[str] = []
    duplicates = 0
    for pq in pad_pseudo_queries(pseudo_queries, cfg.n_docids_per_doc):
        try:
            entry = generate_docid(provider, template, pq, cfg)
        except GenerationError as exc:
            log.warning("docid generation failed (%s, query %d): %s", doc.doc_ref, pq.index, exc)
            failures.append(str(exc))
            continue
        if entry.docid_text in seen:
            duplicates += 1
            continue
        seen.add(entry.docid_text)
        entries.append(entry)
    return entries, duplicates, failures


def index_corpus(
    provider: LmProvider,
    template: PromptTemplate | None,
    corpus: list[Document],
    pseudo_query_source: PseudoQuerySource,
    cfg: IndexingConfig,
    workers: int = 1,
) -> tuple[DocIdBank, CollisionReport, IndexingStats]:
    """Index every document, resolve collisions, and retry orphaned documents.

    Documents are processed by a worker pool; bank insertions are applied
    serially in corpus order, so runs with a pure provider are deterministic
    regardless of worker count. Transport failures propagate (outage);
    per-query generation failures are only recorded.
    """
    cfg.validate()
    if any(not d.text for d in corpus):
        raise ValueError("corpus contains a document with empty text")
    refs = [d.doc_ref for d in corpus]
    if len(set(refs)) != len(refs):
        raise ValueError("corpus contains duplicate doc_refs")

    bank = DocIdBank(provider.token_space)
    stats = IndexingStats(documents=len(corpus))
    report = CollisionReport()
    by_ref = {d.doc_ref: d for d in corpus}

    def run_round(docs: list[Document], perturb: str | None) -> None:
        def work(doc: Document):
            try:
                queries = pseudo_query_source(doc)
                if perturb:
                    queries = [PseudoQuery(q.doc_ref, q.text + perturb, q.index) for q in queries]
                return _collect_docids(provider, template, doc, queries, cfg)
            except (IndexingFailed, GenerationError) as exc:
                log.warning("document %s not indexed: %s", doc.doc_ref, exc)
                return [], 0, [str(exc)]

        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            results = list(pool.map(work, docs))
        for doc, (entries, duplicates, failures) in zip(docs, results):
            stats.docids_generated += len(entries) + duplicates
            stats.duplicates_within_doc += duplicates
            stats.generation_failures += len(failures)
            if not entries:
                stats.failed_documents.append(doc.doc_ref)
                continue
            for entry in entries:
                bank.insert(entry)

    run_round(corpus, perturb=None)
    report = bank.resolve_collisions()
    stats.collisions_removed = len(report.colliding_docids)

    orphan_candidates = set(report.orphaned_docs)
    for round_no in range(1, cfg.regeneration_rounds + 1):
        todo = sorted(d for d in orphan_candidates if not bank.by_doc.get(d) and d in by_ref)
        if not todo:
            break
        stats.regeneration_rounds_used = round_no
        run_round([by_ref[d] for d in todo], perturb=f" (retry {round_no})")
        round_report = bank.resolve_collisions()
        report.colliding_docids.extend(round_report.colliding_docids)
        stats.collisions_removed += len(round_report.colliding_docids)
        orphan_candidates |= set(round_report.orphaned_docs)

    report.orphaned_docs = sorted(d for d in orphan_candidates if not bank.by_doc.get(d))
    stats.orphans_remaining = list(report.orphaned_docs)
    stats.docids_kept = len(bank.by_docid)
    stats.failed_documents = sorted(set(stats.failed_documents))
    bank.freeze()
    return bank, report, stats


def generate_pseudo_queries(provider: LmProvider, doc: Document, n: int) -> list[PseudoQuery]:
    """LM fallback for the external query generator: n few-shot generations."""
    if n < 1:
        raise ValueError("n must be >= 1")
    space = provider.token_space
    if space is None:
        raise ValueError("provider has no token space; cannot decode pseudo queries")
    prompt = DEFAULT_QUERY_GEN_TEMPLATE.render(doc.text[:DOC_TEXT_PROMPT_LIMIT])
    out = []
    for j in range(1, n + 1):
        tokens = provider.generate_greedy(
            PromptContext(prompt),
            min_tokens=1,
            max_tokens=PSEUDO_QUERY_MAX_TOKENS,
            stop_token=space.end_id,
        )
        text = space.decode(tokens).strip()
        if not text:
            raise EmptyGeneration(f"pseudo-query generation for {doc.doc_ref!r} was all whitespace")
        out.append(PseudoQuery(doc.doc_ref, text, index=j))
    return out


def make_pseudo_query_source(
    queries_by_doc: dict[str, list[PseudoQuery]] | None,
    provider: LmProvider | None,
    n: int,
) -> PseudoQuerySource:
    """File-backed source with LM generation as fallback for uncovered docs."""

    def source(doc: Document) -> list[PseudoQuery]:
        if queries_by_doc:
            found = queries_by_doc.get(doc.doc_ref)
            if found:
                return found
        if provider is None:
            raise IndexingFailed(f"no pseudo queries available for document {doc.doc_ref!r}")
        return generate_pseudo_queries(provider, doc, n)

    return source


# -- file formats ---------------------------------------------------------


def load_corpus(path: str | Path) -> list[Document]:
    """JSON-lines corpus: one {"doc_id", "text"} object per line."""
    docs = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                doc = Document(str(obj["doc_id"]), str(obj["text"]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise FormatError(f"{path}:{lineno}: bad corpus record: {exc}") from exc
            if not doc.text:
                raise FormatError(f"{path}:{lineno}: document {doc.doc_ref!r} has empty text")
            if doc.doc_ref in seen:
                raise FormatError(f"{path}:{lineno}: duplicate doc_id {doc.doc_ref!r}")
            seen.add(doc.doc_ref)
            docs.append(doc)
    return docs


def load_pseudo_queries(path: str | Path) -> dict[str, list[PseudoQuery]]:
    """JSON-lines pseudo queries: one {"doc_id", "query"} object per line."""
    by_doc: dict[str, list[PseudoQuery]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                doc_id, query = str(obj["doc_id"]), str(obj["query"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise FormatError(f"{path}:{lineno}: bad pseudo-query record: {exc}") from exc
            if not query:
                raise FormatError(f"{path}:{lineno}: empty query for doc {doc_id!r}")
            bucket = by_doc.setdefault(doc_id, [])
            bucket.append(PseudoQuery(doc_id, query, index=len(bucket) + 1))
    return by_doc

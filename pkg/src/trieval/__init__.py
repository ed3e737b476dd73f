"""Few-shot generative retrieval over a trie of LM-minted document identifiers."""

from .bank import (
    CollisionReport,
    DocIdBank,
    DocIdEntry,
    InsertOutcome,
    InsertStatus,
    merge_banks,
)
from .decoder import DecodeConfig, Hypothesis, constrained_beam_search, greedy_constrained
from .evaluation import MetricsReport, evaluate, evaluate_run, mrr_at_k, recall_at_k
from .indexing import (
    Document,
    IndexingConfig,
    IndexingStats,
    PseudoQuery,
    generate_docid,
    generate_pseudo_queries,
    index_corpus,
    index_document,
)
from .lm import HttpLm, MockLm, MockRule, NextTokenDistribution, PromptContext
from .prompts import DEFAULT_INDEX_TEMPLATE, DEFAULT_QUERY_GEN_TEMPLATE, PromptTemplate, build_prompt
from .retriever import RankedDoc, RunResult, retrieve, retrieve_batch
from .tokens import (
    CharacterTokenSpace,
    ExternalTokenSpace,
    TokenSpace,
    WhitespaceTokenSpace,
)

__all__ = [
    "CharacterTokenSpace",
    "CollisionReport",
    "DEFAULT_INDEX_TEMPLATE",
    "DEFAULT_QUERY_GEN_TEMPLATE",
    "DecodeConfig",
    "DocIdBank",
    "DocIdEntry",
    "Document",
    "ExternalTokenSpace",
    "HttpLm",
    "Hypothesis",
    "IndexingConfig",
    "IndexingStats",
    "InsertOutcome",
    "InsertStatus",
    "MetricsReport",
    "MockLm",
    "MockRule",
    "NextTokenDistribution",
    "PromptContext",
    "PromptTemplate",
    "PseudoQuery",
    "RankedDoc",
    "RunResult",
    "TokenSpace",
    "WhitespaceTokenSpace",
    "build_prompt",
    "constrained_beam_search",
    "evaluate",
    "evaluate_run",
    "generate_docid",
    "generate_pseudo_queries",
    "greedy_constrained",
    "index_corpus",
    "index_document",
    "merge_banks",
    "mrr_at_k",
    "recall_at_k",
    "retrieve",
    "retrieve_batch",
]

__version__ = "0.1.0"

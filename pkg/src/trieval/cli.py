"""Command-line surface: index, retrieve, eval, and bank maintenance.

Exit codes partition the error classes: 0 success, 1 internal, 2 bad
configuration or missing/IO-failed files, 3 LM transport trouble, 4 data
mismatch (malformed files, unknown ids, orphaned documents).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bank import DocIdBank, merge_banks
from .config import AppConfig, build_provider, build_token_space, load_app_config
from .errors import (
    ConfigError,
    FormatError,
    MissingQrels,
    ProtocolError,
    TransportError,
    TrievalError,
)
from .evaluation import evaluate_run, load_queries
from .figures import save_bank_figure, save_metrics_figure
from .indexing import index_corpus, load_corpus, load_pseudo_queries, make_pseudo_query_source
from .prompts import DEFAULT_INDEX_TEMPLATE, PromptTemplate
from .retriever import retrieve_batch, write_run_file
from .tokens import ExternalTokenSpace, WhitespaceTokenSpace

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_TRANSPORT = 3
EXIT_DATA = 4


def _dump_json(data: dict, path: str | Path | None) -> str:
    text = json.dumps(data, indent=2, sort_keys=True)
    if path is not None:
        Path(path).write_text(text + "\n", encoding="utf-8")
    return text


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{what} not found: {path}")
    return p


def _load_setup(args) -> tuple[AppConfig, object, object]:
    cfg = load_app_config(args.config)
    if args.workers:
        cfg.workers = args.workers
    if args.beam_width:
        cfg.decode.beam_width = args.beam_width
    if args.vocab:
        cfg.token_space.kind = "whitespace"
        cfg.token_space.vocab_file = args.vocab
    if cfg.token_space.kind == "whitespace":
        _require_file(cfg.token_space.vocab_file, "vocabulary file")
    space = build_token_space(cfg)
    if args.mock_lm:
        _require_file(args.mock_lm, "mock LM table")
    provider = build_provider(cfg, space, args.mock_lm)
    return cfg, space, provider


def _load_template(path: str | None) -> PromptTemplate:
    if not path:
        return DEFAULT_INDEX_TEMPLATE
    _require_file(path, "template file")
    try:
        pairs = json.loads(Path(path).read_text(encoding="utf-8"))
        demos = tuple((str(q), str(a)) for q, a in pairs)
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise FormatError(f"template file {path} must hold a JSON list of [query, identifier] pairs: {exc}")
    return PromptTemplate(demonstrations=demos)


def cmd_index(args) -> int:
    cfg, space, provider = _load_setup(args)
    _require_file(args.corpus, "corpus file")
    corpus = load_corpus(args.corpus)
    queries_by_doc = None
    if args.pseudo_queries:
        _require_file(args.pseudo_queries, "pseudo-queries file")
        queries_by_doc = load_pseudo_queries(args.pseudo_queries)
    template = _load_template(args.template)
    source = make_pseudo_query_source(queries_by_doc, provider, cfg.indexing.n_docids_per_doc)

    bank, report, stats = index_corpus(
        provider, template, corpus, source, cfg.indexing, workers=cfg.workers
    )
    bank_path = Path(args.bank_out)
    bank.save(bank_path)
    if isinstance(space, ExternalTokenSpace):
        registry = cfg.token_space.registry_file or f"{bank_path}.vocab"
        space.save(registry)
    collisions_path = args.collisions_out or f"{bank_path}.collisions.json"
    _dump_json(
        {
            "colliding_docids": [[text, docs] for text, docs in report.colliding_docids],
            "orphaned_docs": report.orphaned_docs,
        },
        collisions_path,
    )
    stats_path = args.stats_out or f"{bank_path}.stats.json"
    print(_dump_json(stats.as_dict(), stats_path))
    if report.orphaned_docs:
        print(
            f"warning: {len(report.orphaned_docs)} document(s) left without any docid",
            file=sys.stderr,
        )
        return EXIT_DATA
    return EXIT_OK


def cmd_retrieve(args) -> int:
    cfg, space, provider = _load_setup(args)
    _require_file(args.bank, "bank file")
    _require_file(args.queries, "queries file")
    bank = DocIdBank.load(args.bank, space)
    bank.freeze()
    template = _load_template(args.template)
    queries = load_queries(args.queries)
    results = retrieve_batch(
        provider,
        bank,
        template,
        queries,
        k=args.k,
        cfg=cfg.decode,
        workers=cfg.workers,
        aggregate=cfg.aggregate,
    )
    write_run_file(args.out, results, run_tag=args.run_tag or cfg.run_tag)
    return EXIT_OK


def cmd_eval(args) -> int:
    _require_file(args.run, "run file")
    _require_file(args.qrels, "qrels file")
    report = evaluate_run(args.run, args.qrels)
    print(_dump_json(report.as_dict(), args.out))
    figure = args.figure
    if figure is None and args.out and not args.no_figure:
        figure = Path(args.out).with_suffix(".png")
    if figure is not None and not args.no_figure:
        save_metrics_figure(report, figure)
    return EXIT_OK


def _load_bank(args, space) -> DocIdBank:
    _require_file(args.bank, "bank file")
    return DocIdBank.load(args.bank, space)


def cmd_bank_stats(args) -> int:
    cfg, space, _ = _load_setup_no_provider(args)
    bank = _load_bank(args, space)
    print(_dump_json(bank.stats(), args.out))
    figure = args.figure
    if figure is None and args.out and not args.no_figure:
        figure = Path(args.out).with_suffix(".png")
    if figure is not None and not args.no_figure:
        save_bank_figure(bank, figure)
    return EXIT_OK


def cmd_bank_remove_doc(args) -> int:
    cfg, space, _ = _load_setup_no_provider(args)
    bank = _load_bank(args, space)
    removed = bank.remove_document(args.doc_ref)
    bank.save(args.out or args.bank)
    print(_dump_json({"doc_ref": args.doc_ref, "removed_docids": removed}, None))
    return EXIT_OK


def cmd_bank_merge(args) -> int:
    cfg, space, _ = _load_setup_no_provider(args)
    _require_file(args.bank_a, "bank file")
    _require_file(args.bank_b, "bank file")
    merged, report = merge_banks(
        DocIdBank.load(args.bank_a, space), DocIdBank.load(args.bank_b, space)
    )
    merged.save(args.out)
    print(
        _dump_json(
            {
                "stats": merged.stats(),
                "colliding_docids": [[text, docs] for text, docs in report.colliding_docids],
                "orphaned_docs": report.orphaned_docs,
            },
            None,
        )
    )
    return EXIT_OK


def _load_setup_no_provider(args):
    # bank maintenance needs the token space but no LM
    cfg = load_app_config(args.config)
    if args.vocab:
        cfg.token_space.kind = "whitespace"
        cfg.token_space.vocab_file = args.vocab
    if cfg.token_space.kind == "whitespace":
        _require_file(cfg.token_space.vocab_file, "vocabulary file")
    space = build_token_space(cfg)
    return cfg, space, None


def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="JSON config file")
    shared.add_argument("--mock-lm", metavar="TABLE", help="use the table mock instead of the HTTP backend")
    shared.add_argument("--workers", type=int, help="worker pool width")
    shared.add_argument("--beam-width", type=int, help="decoder beam width override")
    shared.add_argument("--k", type=int, default=10, help="results per query (retrieve)")
    shared.add_argument("--vocab", help="whitespace vocabulary file (one token per line)")
    shared.add_argument("--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(
        prog="trieval",
        description="Few-shot generative retrieval over a docid trie.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", parents=[shared], help="mint docids for a corpus and build the bank")
    p.add_argument("--corpus", required=True, help="JSON-lines corpus ({doc_id, text})")
    p.add_argument("--pseudo-queries", help="JSON-lines pseudo queries ({doc_id, query})")
    p.add_argument("--template", help="JSON list of [query, identifier] demonstration pairs")
    p.add_argument("--bank-out", required=True, help="bank file to write")
    p.add_argument("--stats-out", help="stats JSON (default: <bank>.stats.json)")
    p.add_argument("--collisions-out", help="collision report JSON (default: <bank>.collisions.json)")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("retrieve", parents=[shared], help="decode docids for queries, write a run file")
    p.add_argument("--bank", required=True, help="bank file")
    p.add_argument("--queries", required=True, help="TSV queries (query_id TAB text)")
    p.add_argument("--template", help="JSON demonstration pairs (must match indexing)")
    p.add_argument("--out", required=True, help="TREC-style run file to write")
    p.add_argument("--run-tag", help="run tag for the TREC lines")
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("eval", parents=[shared], help="score a run file against qrels")
    p.add_argument("--run", required=True, help="TREC-style run file")
    p.add_argument("--qrels", required=True, help="TSV qrels (query_id TAB doc_ref)")
    p.add_argument("--out", help="write the metrics report JSON here as well")
    p.add_argument("--figure", help="write a metrics figure to this path")
    p.add_argument("--no-figure", action="store_true", help="skip figure rendering")
    p.set_defaults(func=cmd_eval)

    bank = sub.add_parser("bank", help="inspect and edit bank files")
    bank_sub = bank.add_subparsers(dest="bank_command", required=True)

    p = bank_sub.add_parser("stats", parents=[shared], help="print bank statistics")
    p.add_argument("--bank", required=True)
    p.add_argument("--out", help="write the stats JSON here as well")
    p.add_argument("--figure", help="write bank histograms to this path")
    p.add_argument("--no-figure", action="store_true", help="skip figure rendering")
    p.set_defaults(func=cmd_bank_stats)

    p = bank_sub.add_parser("remove-doc", parents=[shared], help="drop one document's docids")
    p.add_argument("--bank", required=True)
    p.add_argument("doc_ref", help="document to remove")
    p.add_argument("--out", help="write result here (default: rewrite in place)")
    p.set_defaults(func=cmd_bank_remove_doc)

    p = bank_sub.add_parser("merge", parents=[shared], help="union two banks and re-resolve collisions")
    p.add_argument("bank_a")
    p.add_argument("bank_b")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bank_merge)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TransportError, ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (FormatError, MissingQrels) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrievalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def entrypoint() -> None:
    sys.exit(main())

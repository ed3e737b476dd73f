"""Trie-constrained beam search over a docid bank.

At every step the candidate set is exactly the trie children of the current
prefix, plus the reserved end token when the prefix is a complete docid of
admissible length. Everything else is masked before scoring, so any returned
hypothesis is a bank member by construction; validity is never post-filtered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .bank import DocIdBank
from .errors import DecodeError
from .lm import LmProvider, NEG_INF, PromptContext, logsumexp
from .prompts import PromptTemplate, build_prompt
from .tokens import TokenId


@dataclass(frozen=True)
class Hypothesis:
    """A beam state: token prefix, cumulative log-probability, completion flag."""

    tokens: tuple[TokenId, ...]
    score: float
    completed: bool = False


@dataclass
class DecodeConfig:
    beam_width: int = 100
    max_tokens: int = 15
    min_tokens: int = 3
    #: renormalize masked distributions over the candidate set before scoring;
    #: switch off to sum the provider's raw log-probs instead
    renormalize: bool = True
    #: exponent for dividing scores by hypothesis length when ranking; 0 = off
    length_penalty: float = 0.0
    #: only lexicographic-on-token-ids ordering is supported
    tie_break: str = "lexicographic"

    def validate(self) -> None:
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        if not 1 <= self.min_tokens <= self.max_tokens:
            raise ValueError("need 1 <= min_tokens <= max_tokens")
        if self.tie_break != "lexicographic":
            raise ValueError(f"unsupported tie_break: {self.tie_break!r}")


def constrained_beam_search(
    provider: LmProvider,
    bank: DocIdBank,
    template: PromptTemplate | None,
    query_text: str,
    cfg: DecodeConfig,
) -> list[Hypothesis]:
    """Decode up to ``beam_width`` complete docids for one query.

    Returns completed hypotheses sorted by score descending, ties broken
    lexicographically on token ids. Scores are cumulative log-probabilities
    including the end-token step.
    """
    cfg.validate()
    bank.require_nonempty()
    prompt = build_prompt(template, query_text) if template is not None else query_text

    active: list[tuple[tuple[TokenId, ...], float]] = [((), 0.0)]
    completed: list[Hypothesis] = []
    for _ in range(cfg.max_tokens + 1):
        expansions: list[tuple[tuple[TokenId, ...], float]] = []
        for tokens, score in active:
            candidates = _candidates(bank, tokens, cfg)
            if not candidates:
                continue
            dist = provider.next_token_logprobs(
                PromptContext(prompt, tokens), restrict_to=set(candidates)
            )
            logprobs = {t: dist.entries[t] for t in candidates}
            if cfg.renormalize:
                logprobs = _renormalize(logprobs)
            for t in candidates:
                new_score = score + logprobs[t]
                if t == bank.end_token:
                    completed.append(Hypothesis(tokens, new_score, completed=True))
                else:
                    expansions.append((tokens + (t,), new_score))
        expansions.sort(key=lambda e: (-e[1], e[0]))
        active = expansions[: cfg.beam_width]
        if not active:
            break
        if len(completed) >= cfg.beam_width:
            # Admissible stop: per-step log-probs are <= 0, so an active
            # hypothesis can never beat its own current score.
            kth_best = sorted(completed, key=_rank_key(cfg))[cfg.beam_width - 1].score
            if kth_best > max(score for _, score in active):
                break

    completed.sort(key=_rank_key(cfg))
    return completed[: cfg.beam_width]


def greedy_constrained(
    provider: LmProvider,
    bank: DocIdBank,
    template: PromptTemplate | None,
    query_text: str,
    cfg: DecodeConfig,
) -> Hypothesis:
    """Beam-width-1 specialization of :func:`constrained_beam_search`."""
    results = constrained_beam_search(provider, bank, template, query_text, replace(cfg, beam_width=1))
    if not results:
        raise DecodeError("no docid reachable within the configured length window")
    return results[0]


def _candidates(bank: DocIdBank, tokens: tuple[TokenId, ...], cfg: DecodeConfig) -> list[TokenId]:
    children, can_terminate, _ = bank.allowed_next(list(tokens))
    out = sorted(children) if len(tokens) < cfg.max_tokens else []
    if can_terminate and len(tokens) >= cfg.min_tokens:
        out.append(bank.end_token)
    return out


def _renormalize(logprobs: dict[TokenId, float]) -> dict[TokenId, float]:
    total = logsumexp(logprobs.values())
    if total == NEG_INF:
        # Every candidate was assigned zero mass; fall back to uniform so the
        # masked path stays decodable.
        uniform = -math.log(len(logprobs))
        return {t: uniform for t in logprobs}
    return {t: lp - total for t, lp in logprobs.items()}


def _rank_key(cfg: DecodeConfig):
    if cfg.length_penalty:
        return lambda h: (-(h.score / max(1, len(h.tokens)) ** cfg.length_penalty), h.tokens)
    return lambda h: (-h.score, h.tokens)

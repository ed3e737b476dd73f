"""Independent scoring oracle for decoder tests.

Scores every docid in a bank by walking its token path step by step and
summing the (optionally renormalized) log-probability of each step, with no
beam, pruning, or hypothesis management involved. Used to verify
constrained_beam_search output by exhaustive enumeration.
"""

from __future__ import annotations

from trieval.decoder import DecodeConfig, Hypothesis
from trieval.lm import NEG_INF, PromptContext, logsumexp


def oracle_score(provider, bank, prompt: str, tokens, cfg: DecodeConfig):
    """Full-sequence score of one docid, or None if it is unreachable."""
    path = tuple(tokens)
    if not cfg.min_tokens <= len(path) <= cfg.max_tokens:
        return None
    score = 0.0
    steps = list(path) + [bank.end_token]
    for i, step_token in enumerate(steps):
        prefix = path[:i]
        children, can_terminate, _ = bank.allowed_next(list(prefix))
        candidates = sorted(children) if len(prefix) < cfg.max_tokens else []
        if can_terminate and len(prefix) >= cfg.min_tokens:
            candidates.append(bank.end_token)
        if step_token not in candidates:
            return None
        dist = provider.next_token_logprobs(
            PromptContext(prompt, prefix), restrict_to=set(candidates)
        )
        logprobs = {t: dist.entries[t] for t in candidates}
        if cfg.renormalize:
            total = logsumexp(logprobs.values())
            if total == NEG_INF:
                import math

                logprobs = {t: -math.log(len(logprobs)) for t in logprobs}
            else:
                logprobs = {t: lp - total for t, lp in logprobs.items()}
        score += logprobs[step_token]
    return score


def oracle_ranking(provider, bank, prompt: str, cfg: DecodeConfig) -> list[Hypothesis]:
    """Exhaustively score every bank docid, sort, truncate to beam_width."""
    scored = []
    for _, _, tokens in bank.entries():
        score = oracle_score(provider, bank, prompt, tokens, cfg)
        if score is not None:
            scored.append(Hypothesis(tuple(tokens), score, completed=True))
    scored.sort(key=lambda h: (-h.score, h.tokens))
    return scored[: cfg.beam_width]

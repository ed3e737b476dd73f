"""Next-token log-probability providers.

Two backends share one contract: a deterministic table-driven mock for tests
and offline runs, and an HTTP client for completion endpoints that report
per-token top-K log-probabilities. Both answer ``next_token_logprobs`` for a
prompt plus generated prefix, optionally restricted to a candidate token set,
and both inherit a greedy generator built on top of that single primitive.
"""

from __future__ import annotations

import json
import math
import random
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from threading import BoundedSemaphore

import requests

from .errors import FormatError, GenerationError, ProtocolError, TransportError
from .tokens import ExternalTokenSpace, TokenId, TokenSequence, TokenSpace

#: log-probability assigned to tokens the endpoint did not include in its top-K
FLOOR_LOGPROB = -30.0

NEG_INF = float("-inf")


def logsumexp(values) -> float:
    vals = list(values)
    if not vals:
        return NEG_INF
    m = max(vals)
    if m == NEG_INF:
        return NEG_INF
    return m + math.log(sum(math.exp(v - m) for v in vals))


@dataclass(frozen=True)
class PromptContext:
    """Full LM input: prompt text plus the tokens generated so far."""

    prompt_text: str
    generated_prefix: tuple[TokenId, ...] = ()

    def __post_init__(self):
        if not self.prompt_text:
            raise ValueError("prompt_text must be non-empty")
        object.__setattr__(self, "generated_prefix", tuple(self.generated_prefix))

    def extended(self, token: TokenId) -> "PromptContext":
        return PromptContext(self.prompt_text, self.generated_prefix + (token,))


@dataclass
class NextTokenDistribution:
    """Log-probabilities over a token set.

    ``normalized`` means the values are on a full-vocabulary softmax scale
    (so completing the entries over the whole vocabulary would logsumexp to
    zero), not that every vocabulary token is listed.
    """

    entries: dict[TokenId, float]
    normalized: bool = True

    def __post_init__(self):
        if not self.entries:
            raise ValueError("distribution has no entries")


class LmProvider(ABC):
    """A next-token oracle plus a greedy generator."""

    token_space: TokenSpace | None = None

    @abstractmethod
    def next_token_logprobs(
        self, ctx: PromptContext, restrict_to: set[TokenId] | None = None
    ) -> NextTokenDistribution:
        """Log-probs for the next token; covers at least ``restrict_to``."""

    def generate_greedy(
        self,
        ctx: PromptContext,
        min_tokens: int,
        max_tokens: int,
        stop_token: TokenId,
        temperature: float = 0.0,
        rng: random.Random | None = None,
    ) -> TokenSequence:
        """Generate until ``stop_token`` or ``max_tokens``.

        The stop token is masked while fewer than ``min_tokens`` tokens have
        been produced, so the returned length is always within bounds. At
        temperature zero the argmax is taken, ties broken toward the lowest
        token id; a positive temperature samples from the softmax instead.
        """
        if not 1 <= min_tokens <= max_tokens:
            raise ValueError(f"need 1 <= min_tokens <= max_tokens, got {min_tokens}/{max_tokens}")
        out: TokenSequence = []
        while len(out) < max_tokens:
            step = PromptContext(ctx.prompt_text, ctx.generated_prefix + tuple(out))
            entries = dict(self.next_token_logprobs(step).entries)
            if len(out) < min_tokens:
                entries.pop(stop_token, None)
            if not entries:
                raise GenerationError("no tokens available after masking the stop token")
            if temperature > 0:
                tok = _sample(entries, temperature, rng or random.Random())
            else:
                tok = min(entries, key=lambda t: (-entries[t], t))
            if tok == stop_token:
                break
            out.append(tok)
        return out


def _sample(entries: dict[TokenId, float], temperature: float, rng: random.Random) -> TokenId:
    toks = sorted(entries)
    scaled = [entries[t] / temperature for t in toks]
    total = logsumexp(scaled)
    weights = [math.exp(s - total) for s in scaled]
    return rng.choices(toks, weights=weights, k=1)[0]


@dataclass(frozen=True)
class MockRule:
    """One table row: applies when both of its optional keys match.

    ``logprobs`` lists explicit full-vocabulary-scale log-probs; whatever
    probability mass is left over is spread uniformly across the unlisted
    tokens, so every rule describes a normalized distribution.
    """

    logprobs: dict[TokenId, float]
    prompt_contains: str | None = None
    prefix: tuple[TokenId, ...] | None = field(default=None)

    def matches(self, ctx: PromptContext) -> bool:
        if self.prompt_contains is not None and self.prompt_contains not in ctx.prompt_text:
            return False
        if self.prefix is not None and tuple(self.prefix) != ctx.generated_prefix:
            return False
        return True


class MockLm(LmProvider):
    """Deterministic table-driven provider; pure over (ctx, restrict_to).

    The first matching rule wins; contexts with no matching rule fall back to
    the default distribution ("uniform" or an explicit table).
    """

    def __init__(
        self,
        vocab_size: int | None = None,
        rules: list[MockRule] | None = None,
        default: str | dict[TokenId, float] = "uniform",
        token_space: TokenSpace | None = None,
    ):
        if vocab_size is None:
            if token_space is None:
                raise ValueError("need vocab_size or token_space")
            vocab_size = token_space.vocab_size
        self.vocab_size = vocab_size
        self.token_space = token_space
        self.rules = list(rules or [])
        if default == "uniform":
            self._default_listed: dict[TokenId, float] = {}
        elif isinstance(default, dict):
            self._default_listed = dict(default)
        else:
            raise ValueError(f"unsupported default distribution: {default!r}")
        for rule in self.rules:
            self._validate_listed(rule.logprobs)
        self._validate_listed(self._default_listed)

    def _validate_listed(self, listed: dict[TokenId, float]) -> None:
        for tid in listed:
            if not 0 <= tid < self.vocab_size:
                raise FormatError(f"mock table token id {tid} outside vocab of size {self.vocab_size}")
        if listed and logsumexp(listed.values()) > 1e-6:
            raise FormatError("mock table distribution has probability mass above 1")

    def next_token_logprobs(
        self, ctx: PromptContext, restrict_to: set[TokenId] | None = None
    ) -> NextTokenDistribution:
        if restrict_to is not None and not restrict_to:
            raise ValueError("restrict_to must be non-empty when given")
        listed = self._default_listed
        for rule in self.rules:
            if rule.matches(ctx):
                listed = rule.logprobs
                break
        spread = self._spread_logprob(listed)
        tokens = sorted(restrict_to) if restrict_to is not None else range(self.vocab_size)
        entries = {t: listed.get(t, spread) for t in tokens}
        return NextTokenDistribution(entries, normalized=True)

    def _spread_logprob(self, listed: dict[TokenId, float]) -> float:
        # Mass not claimed by the listed tokens, shared by the rest of the vocab.
        unlisted = self.vocab_size - len(listed)
        if unlisted <= 0:
            return NEG_INF
        remaining = 1.0 - sum(math.exp(lp) for lp in listed.values())
        if remaining <= 0.0:
            return NEG_INF
        return math.log(remaining / unlisted)

    @classmethod
    def from_dict(cls, data: dict, token_space: TokenSpace | None = None) -> "MockLm":
        try:
            vocab_size = data.get("vocab_size")
            default = data.get("default", "uniform")
            if isinstance(default, dict):
                if default.get("uniform"):
                    default = "uniform"
                else:
                    default = _parse_logprobs(default["logprobs"])
            rules = [
                MockRule(
                    logprobs=_parse_logprobs(r["logprobs"]),
                    prompt_contains=r.get("prompt_contains"),
                    prefix=tuple(r["prefix"]) if r.get("prefix") is not None else None,
                )
                for r in data.get("rules", [])
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad mock table: {exc}") from exc
        if vocab_size is None and token_space is None:
            raise FormatError("mock table needs a vocab_size when no token space is given")
        return cls(vocab_size=vocab_size, rules=rules, default=default, token_space=token_space)

    @classmethod
    def from_file(cls, path: str | Path, token_space: TokenSpace | None = None) -> "MockLm":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not valid JSON: {exc}") from exc
        return cls.from_dict(data, token_space=token_space)


def _parse_logprobs(raw: dict) -> dict[TokenId, float]:
    return {int(t): float(lp) for t, lp in raw.items()}


class HttpLm(LmProvider):
    """Client for a completion endpoint that returns top-K log-probabilities.

    Each call re-sends the full prompt text plus the decoded prefix (the
    provider is stateless). Requests are retried with exponential backoff on
    transport failures and 5xx answers; candidate tokens absent from the
    endpoint's top-K get ``floor_logprob``. Token strings from responses are
    interned into the external token space.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        token_space: ExternalTokenSpace,
        top_k: int = 20,
        floor_logprob: float = FLOOR_LOGPROB,
        timeout: float = 30.0,
        retries: int = 3,
        backoff: float = 0.5,
        max_in_flight: int = 4,
        api_key: str | None = None,
        session: requests.Session | None = None,
    ):
        if not isinstance(token_space, ExternalTokenSpace):
            raise ValueError("HttpLm requires an external token space")
        self.endpoint = endpoint
        self.model = model
        self.token_space = token_space
        self.top_k = top_k
        self.floor_logprob = floor_logprob
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.api_key = api_key
        self._gate = BoundedSemaphore(max_in_flight)
        self._session = session or requests.Session()

    def next_token_logprobs(
        self, ctx: PromptContext, restrict_to: set[TokenId] | None = None
    ) -> NextTokenDistribution:
        if restrict_to is not None and not restrict_to:
            raise ValueError("restrict_to must be non-empty when given")
        prompt = ctx.prompt_text + self.token_space.decode(list(ctx.generated_prefix))
        payload = {
            "model": self.model,
            "prompt": prompt,
            "max_tokens": 1,
            "logprobs": self.top_k,
            "temperature": 0,
        }
        data = self._post(payload)
        top = self._extract_top_logprobs(data)
        by_id = {self.token_space.intern(text): lp for text, lp in top.items()}
        if restrict_to is None:
            entries = by_id
        else:
            entries = {t: by_id.get(t, self.floor_logprob) for t in sorted(restrict_to)}
        return NextTokenDistribution(entries, normalized=True)

    def _post(self, payload: dict) -> dict:
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        with self._gate:
            for attempt in range(self.retries + 1):
                if attempt:
                    time.sleep(self.backoff * 2 ** (attempt - 1))
                try:
                    resp = self._session.post(
                        self.endpoint, json=payload, headers=headers, timeout=self.timeout
                    )
                except requests.RequestException as exc:
                    last_error = exc
                    continue
                if resp.status_code >= 500:
                    last_error = TransportError(f"server error {resp.status_code}")
                    continue
                if resp.status_code >= 400:
                    raise ProtocolError(f"endpoint rejected request: {resp.status_code} {resp.text[:200]}")
                try:
                    return resp.json()
                except ValueError as exc:
                    raise ProtocolError(f"endpoint returned non-JSON body: {exc}") from exc
        raise TransportError(f"LM endpoint unreachable after {self.retries + 1} attempts: {last_error}")

    @staticmethod
    def _extract_top_logprobs(data: dict) -> dict[str, float]:
        try:
            choice = data["choices"][0]
            top_list = choice["logprobs"]["top_logprobs"]
            top = top_list[0]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolError("response missing log-probabilities") from exc
        if not isinstance(top, dict) or not top:
            raise ProtocolError("response missing log-probabilities")
        return {str(text): float(lp) for text, lp in top.items()}

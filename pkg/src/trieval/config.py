"""Run configuration: one JSON file, environment overrides for secrets.

Defaults mirror the pipeline's standard constants (10 docids per document,
docid lengths between 3 and 15 tokens, beam width 100) so an empty config is
a valid starting point. ``LM_ENDPOINT`` and ``LM_API_KEY`` override the lm
section so credentials stay out of committed files.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .decoder import DecodeConfig
from .errors import ConfigError
from .indexing import IndexingConfig
from .lm import FLOOR_LOGPROB, HttpLm, LmProvider, MockLm
from .tokens import (
    CharacterTokenSpace,
    ExternalTokenSpace,
    TokenSpace,
    WhitespaceTokenSpace,
)


@dataclass
class LmSettings:
    endpoint: str | None = None
    model: str = "default"
    logprobs_top_k: int = 20
    floor_logprob: float = FLOOR_LOGPROB
    max_in_flight: int = 4
    timeout: float = 30.0
    retries: int = 3
    backoff: float = 0.5
    api_key: str | None = None


@dataclass
class TokenSpaceSettings:
    kind: str = "character"
    vocab_file: str | None = None
    registry_file: str | None = None


@dataclass
class AppConfig:
    lm: LmSettings = field(default_factory=LmSettings)
    indexing: IndexingConfig = field(default_factory=IndexingConfig)
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    token_space: TokenSpaceSettings = field(default_factory=TokenSpaceSettings)
    workers: int = 1
    run_tag: str = "trieval"
    aggregate: str = "max"

    def validate(self) -> None:
        try:
            self.indexing.validate()
            self.decode.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.aggregate not in ("max", "sum"):
            raise ConfigError(f"unsupported aggregate mode: {self.aggregate!r}")
        if self.token_space.kind not in ("whitespace", "character", "external"):
            raise ConfigError(f"unknown token space kind: {self.token_space.kind!r}")
        if self.token_space.kind == "whitespace" and not self.token_space.vocab_file:
            raise ConfigError("whitespace token space needs a vocab_file")


def _apply_section(target, data: dict, section: str) -> None:
    for key, value in data.items():
        if not hasattr(target, key):
            raise ConfigError(f"unknown key {section}.{key}")
        setattr(target, key, value)


def load_app_config(path: str | Path | None) -> AppConfig:
    """Parse the config file (all sections optional) and apply env overrides."""
    cfg = AppConfig()
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        sections = {
            "lm": cfg.lm,
            "indexing": cfg.indexing,
            "decode": cfg.decode,
            "token_space": cfg.token_space,
        }
        for key, value in data.items():
            if key in sections:
                if not isinstance(value, dict):
                    raise ConfigError(f"section {key} must be an object")
                _apply_section(sections[key], value, key)
            elif key in ("workers", "run_tag", "aggregate"):
                setattr(cfg, key, value)
            else:
                raise ConfigError(f"unknown config key {key!r}")
    if os.environ.get("LM_ENDPOINT"):
        cfg.lm.endpoint = os.environ["LM_ENDPOINT"]
    if os.environ.get("LM_API_KEY"):
        cfg.lm.api_key = os.environ["LM_API_KEY"]
    cfg.validate()
    return cfg


def build_token_space(cfg: AppConfig) -> TokenSpace:
    ts = cfg.token_space
    if ts.kind == "whitespace":
        return WhitespaceTokenSpace.from_file(ts.vocab_file)
    if ts.kind == "character":
        return CharacterTokenSpace()
    if ts.registry_file and Path(ts.registry_file).exists():
        return ExternalTokenSpace.load(ts.registry_file)
    return ExternalTokenSpace()


def build_provider(cfg: AppConfig, space: TokenSpace, mock_table: str | None) -> LmProvider:
    """Table mock when a table file is given, HTTP backend otherwise."""
    if mock_table:
        return MockLm.from_file(mock_table, token_space=space)
    if not cfg.lm.endpoint:
        raise ConfigError("no LM endpoint configured; set lm.endpoint, LM_ENDPOINT, or pass --mock-lm")
    if not isinstance(space, ExternalTokenSpace):
        raise ConfigError("the HTTP backend requires token_space.kind = external")
    return HttpLm(
        endpoint=cfg.lm.endpoint,
        model=cfg.lm.model,
        token_space=space,
        top_k=cfg.lm.logprobs_top_k,
        floor_logprob=cfg.lm.floor_logprob,
        timeout=cfg.lm.timeout,
        retries=cfg.lm.retries,
        backoff=cfg.lm.backoff,
        max_in_flight=cfg.lm.max_in_flight,
        api_key=cfg.lm.api_key,
    )

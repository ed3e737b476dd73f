"""Exception types shared across the package."""


class TrievalError(Exception):
    """Base class for all trieval errors."""


class InvalidToken(TrievalError):
    """A token id falls outside the owning token space."""


class TokenOutOfRange(TrievalError):
    """A docid entry carries token ids the bank cannot accept."""


class PrefixNotInTrie(TrievalError):
    """A token prefix does not correspond to any path in the bank trie."""


class EmptyBank(TrievalError):
    """Decoding was requested against a bank with no docids."""


class DecodeError(TrievalError):
    """Constrained decoding could not produce a completion."""


class GenerationError(TrievalError):
    """A single docid or pseudo-query generation failed."""


class EmptyGeneration(GenerationError):
    """Generation produced only whitespace."""


class IndexingFailed(TrievalError):
    """Every generation attempt for one document failed."""


class FormatError(TrievalError):
    """A data file is malformed or has an unsupported version."""


class MissingQrels(TrievalError):
    """A run contains a query id with no relevance judgments."""

    def __init__(self, query_id: str):
        super().__init__(f"no relevance judgments for query id {query_id!r}")
        self.query_id = query_id


class TransportError(TrievalError):
    """The LM endpoint is unreachable, timed out, or keeps failing."""


class ProtocolError(TrievalError):
    """The LM endpoint answered, but not with usable log-probabilities."""


class ConfigError(TrievalError):
    """The run configuration is invalid."""

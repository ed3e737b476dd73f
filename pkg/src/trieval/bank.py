"""Docid bank: a token trie plus docid/document maps.

The bank owns the one-docid-one-document rule. Inserting a docid already
claimed by another document is refused and recorded; ``resolve_collisions``
then drops contested docids from every claimant, because awarding a shared
docid to one document would make retrieval silently wrong for the rest.
Documents left without any docid are reported so the indexer can retry.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import EmptyBank, FormatError, PrefixNotInTrie, TokenOutOfRange
from .tokens import TokenId, TokenSequence, TokenSpace

BANK_FORMAT = "trieval-bank v1"


@dataclass
class DocIdEntry:
    """One free-text docid owned by one document."""

    docid_text: str
    tokens: TokenSequence
    doc_ref: str
    origin: int = 0


class TrieNode:
    __slots__ = ("children", "terminal")

    def __init__(self):
        self.children: dict[TokenId, TrieNode] = {}
        self.terminal: str | None = None


class InsertStatus(Enum):
    INSERTED = "inserted"
    DUPLICATE_SAME_DOC = "duplicate_same_doc"
    COLLISION = "collision"


@dataclass(frozen=True)
class InsertOutcome:
    status: InsertStatus
    existing_doc: str | None = None


@dataclass
class CollisionReport:
    #: (docid_text, sorted doc_refs that claimed it) per removed docid
    colliding_docids: list[tuple[str, list[str]]] = field(default_factory=list)
    #: documents left with zero docids after resolution
    orphaned_docs: list[str] = field(default_factory=list)


class DocIdBank:
    """Trie over docid token sequences plus the docid<->document maps."""

    def __init__(
        self,
        token_space: TokenSpace | None = None,
        end_token: TokenId | None = None,
        vocab_size: int | None = None,
    ):
        if end_token is None:
            if token_space is None:
                raise ValueError("need a token_space or an explicit end_token")
            end_token = token_space.end_id
        if vocab_size is None and token_space is not None:
            vocab_size = token_space.vocab_size
        self.root = TrieNode()
        self.end_token = end_token
        self.vocab_size = vocab_size
        self.by_docid: dict[str, str] = {}
        self.by_doc: dict[str, set[str]] = {}
        self.frozen = False
        self._tokens: dict[str, tuple[TokenId, ...]] = {}
        self._by_path: dict[tuple[TokenId, ...], str] = {}
        self._pending: dict[str, set[str]] = {}
        self.collisions_resolved = 0

    def __len__(self) -> int:
        return len(self.by_docid)

    # -- build phase ----------------------------------------------------

    def insert(self, entry: DocIdEntry) -> InsertOutcome:
        """Add one docid; refuses duplicates and cross-document collisions.

        A collision leaves the bank unchanged but remembers the claimant for
        ``resolve_collisions``.
        """
        self._require_mutable()
        path = tuple(entry.tokens)
        for t in path:
            if t < 0 or (self.vocab_size is not None and t >= self.vocab_size):
                raise TokenOutOfRange(f"token id {t} out of range for this bank")
            if t == self.end_token:
                raise TokenOutOfRange("reserved end token inside a docid")
        owner = self.by_docid.get(entry.docid_text)
        if owner == entry.doc_ref:
            return InsertOutcome(InsertStatus.DUPLICATE_SAME_DOC)
        if owner is not None:
            self._pending.setdefault(entry.docid_text, set()).add(entry.doc_ref)
            return InsertOutcome(InsertStatus.COLLISION, existing_doc=owner)
        bound = self._by_path.get(path)
        if bound is not None and bound != entry.docid_text:
            raise ValueError(f"token path already bound to docid {bound!r}")
        node = self.root
        for t in path:
            node = node.children.setdefault(t, TrieNode())
        node.terminal = entry.doc_ref
        self.by_docid[entry.docid_text] = entry.doc_ref
        self.by_doc.setdefault(entry.doc_ref, set()).add(entry.docid_text)
        self._tokens[entry.docid_text] = path
        self._by_path[path] = entry.docid_text
        return InsertOutcome(InsertStatus.INSERTED)

    def resolve_collisions(self) -> CollisionReport:
        """Drop every docid claimed by two or more documents; report fallout."""
        self._require_mutable()
        report = CollisionReport()
        involved: set[str] = set()
        for text in sorted(self._pending):
            claimants = set(self._pending[text])
            owner = self.by_docid.get(text)
            if owner is not None:
                claimants.add(owner)
                self._remove_docid(text)
            report.colliding_docids.append((text, sorted(claimants)))
            involved |= claimants
        self._pending.clear()
        self.collisions_resolved += len(report.colliding_docids)
        report.orphaned_docs = sorted(d for d in involved if not self.by_doc.get(d))
        return report

    def remove_document(self, doc_ref: str) -> int:
        """Remove every docid of one document, pruning emptied trie branches."""
        self._require_mutable()
        texts = sorted(self.by_doc.get(doc_ref, ()))
        for text in texts:
            self._remove_docid(text)
        # Forget the document's unresolved claims on other docids too.
        for text in list(self._pending):
            self._pending[text].discard(doc_ref)
            if not self._pending[text]:
                del self._pending[text]
        return len(texts)

    def _remove_docid(self, text: str) -> None:
        path = self._tokens.pop(text)
        del self._by_path[path]
        doc = self.by_docid.pop(text)
        owned = self.by_doc[doc]
        owned.discard(text)
        if not owned:
            del self.by_doc[doc]
        self._pending.pop(text, None)
        chain = [self.root]
        for t in path:
            chain.append(chain[-1].children[t])
        chain[-1].terminal = None
        for i in range(len(path), 0, -1):
            node = chain[i]
            if node.children or node.terminal is not None:
                break
            del chain[i - 1].children[path[i - 1]]

    def freeze(self) -> None:
        """Switch to the read-only retrieval phase."""
        self.frozen = True

    def unfreeze(self) -> None:
        self.frozen = False

    def _require_mutable(self) -> None:
        if self.frozen:
            raise RuntimeError("bank is frozen; call unfreeze() for exclusive mutation")

    # -- retrieval phase -------------------------------------------------

    def allowed_next(
        self, prefix: TokenSequence
    ) -> tuple[set[TokenId], bool, str | None]:
        """Child token ids of a prefix, whether it is a complete docid, and whose."""
        node = self._walk(prefix)
        return set(node.children), node.terminal is not None, node.terminal

    def lookup(self, docid_text: str) -> str | None:
        return self.by_docid.get(docid_text)

    def terminal_at(self, tokens: TokenSequence) -> tuple[str, str] | None:
        """(docid_text, doc_ref) if the token path is a complete docid."""
        text = self._by_path.get(tuple(tokens))
        if text is None:
            return None
        return text, self.by_docid[text]

    def _walk(self, prefix: TokenSequence) -> TrieNode:
        node = self.root
        for t in prefix:
            nxt = node.children.get(t)
            if nxt is None:
                raise PrefixNotInTrie(f"prefix {list(prefix)!r} not in trie")
            node = nxt
        return node

    def require_nonempty(self) -> None:
        if not self.by_docid:
            raise EmptyBank("docid bank is empty")

    # -- inspection -------------------------------------------------------

    def entries(self):
        """All (docid_text, doc_ref, tokens) in deterministic order."""
        for text in sorted(self.by_docid):
            yield text, self.by_docid[text], self._tokens[text]

    def iter_trie_paths(self):
        """Enumerate terminal token paths by walking the trie itself."""

        def dfs(node: TrieNode, path: tuple[TokenId, ...]):
            if node.terminal is not None:
                yield path
            for t in sorted(node.children):
                yield from dfs(node.children[t], path + (t,))

        yield from dfs(self.root, ())

    def node_count(self) -> int:
        count = 0
        stack = [self.root]
        while stack:
            node = stack.pop()
            count += 1
            stack.extend(node.children.values())
        return count

    def structurally_equal(self, other: "DocIdBank") -> bool:
        return (
            self.end_token == other.end_token
            and self.by_docid == other.by_docid
            and self._tokens == other._tokens
            and set(self.iter_trie_paths()) == set(other.iter_trie_paths())
        )

    def stats(self) -> dict:
        docs = len(self.by_doc)
        docids = len(self.by_docid)
        return {
            "documents": docs,
            "docids": docids,
            "collisions_pending": len(self._pending),
            "collisions_resolved": self.collisions_resolved,
            "mean_docids_per_doc": round(docids / docs, 4) if docs else 0.0,
            "trie_nodes": self.node_count(),
        }

    # -- persistence ------------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Versioned header, then one tab-separated record per docid."""
        records = [
            f"{doc}\t{text}\t{' '.join(str(t) for t in tokens)}"
            for text, doc, tokens in sorted(
                self.entries(), key=lambda e: (e[1], e[0])
            )
        ]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{BANK_FORMAT} n={len(records)}\n")
            for record in records:
                fh.write(record + "\n")

    @classmethod
    def load(cls, path: str | Path, token_space: TokenSpace) -> "DocIdBank":
        bank = cls(token_space)
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n")
            prefix = f"{BANK_FORMAT} n="
            if not header.startswith(prefix):
                raise FormatError(f"{path}: not a {BANK_FORMAT} file")
            try:
                expected = int(header[len(prefix):])
            except ValueError as exc:
                raise FormatError(f"{path}: bad record count in header") from exc
            seen = 0
            for lineno, line in enumerate(fh, start=2):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise FormatError(f"{path}:{lineno}: expected 3 tab-separated fields")
                doc_ref, text, raw_tokens = parts
                try:
                    tokens = [int(t) for t in raw_tokens.split()]
                except ValueError as exc:
                    raise FormatError(f"{path}:{lineno}: bad token id") from exc
                try:
                    outcome = bank.insert(DocIdEntry(text, tokens, doc_ref))
                except (TokenOutOfRange, ValueError) as exc:
                    raise FormatError(f"{path}:{lineno}: {exc}") from exc
                if outcome.status is not InsertStatus.INSERTED:
                    raise FormatError(f"{path}:{lineno}: duplicate docid {text!r}")
                seen += 1
        if seen != expected:
            raise FormatError(f"{path}: header promises {expected} records, found {seen} (truncated?)")
        return bank


def merge_banks(a: DocIdBank, b: DocIdBank) -> tuple[DocIdBank, CollisionReport]:
    """Union two banks, then re-apply the collision policy.

    Docids claimed by different documents across the two banks are removed
    from the result entirely, like any other collision.
    """
    if a.end_token != b.end_token:
        raise ValueError("banks use different end tokens")
    vocab = None
    if a.vocab_size is not None and b.vocab_size is not None:
        vocab = max(a.vocab_size, b.vocab_size)
    merged = DocIdBank(end_token=a.end_token, vocab_size=vocab)
    for source in (a, b):
        for text, doc, tokens in source.entries():
            merged.insert(DocIdEntry(text, list(tokens), doc))
    report = merged.resolve_collisions()
    return merged, report

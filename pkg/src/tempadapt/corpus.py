"""Corpus snapshots: loading, tokenization, preprocessing, and splits.

A snapshot is one slice of a corpus sampled at a single timestamp. Documents
are sentence-split and tokenized at load time; all later stages work on the
tokenized sentences only.
"""

from __future__ import annotations

import json
import math
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence


class CorpusError(ValueError):
    """Raised for unreadable, malformed, or empty corpus inputs."""


_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")
# Maximal runs of alphanumeric characters and apostrophes; underscore is not
# a word character here. Runs with no alphanumeric at all are discarded.
_TOKEN = re.compile(r"(?:[^\W_]|')+", re.UNICODE)
_HAS_ALNUM = re.compile(r"[^\W_']", re.UNICODE)

Sentence = tuple[str, ...]
Document = tuple[Sentence, ...]


def tokenize_sentence(text: str) -> list[str]:
    """Lowercase and tokenize a single sentence."""
    return [t for t in _TOKEN.findall(text.lower()) if _HAS_ALNUM.search(t)]


def tokenize_document(text: str) -> list[list[str]]:
    """Split a document into sentences and tokenize each.

    Sentence boundaries are terminal punctuation (., !, ?) followed by
    whitespace. Sentences that tokenize to nothing are dropped.
    """
    sentences = []
    for part in _SENTENCE_SPLIT.split(text.strip()):
        tokens = tokenize_sentence(part)
        if tokens:
            sentences.append(tokens)
    return sentences


class Vocab:
    """Bidirectional token <-> integer id mapping, ids in first-seen order."""

    def __init__(self, tokens: Iterable[str] = ()):
        self._token_to_id: dict[str, int] = {}
        self._id_to_token: list[str] = []
        for token in tokens:
            self.add(token)

    def add(self, token: str) -> int:
        idx = self._token_to_id.get(token)
        if idx is None:
            idx = len(self._id_to_token)
            self._token_to_id[token] = idx
            self._id_to_token.append(token)
        return idx

    def id_of(self, token: str) -> int:
        return self._token_to_id[token]

    def token_of(self, idx: int) -> str:
        return self._id_to_token[idx]

    def __contains__(self, token: str) -> bool:
        return token in self._token_to_id

    def __len__(self) -> int:
        return len(self._id_to_token)

    def __iter__(self):
        return iter(self._id_to_token)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vocab):
            return NotImplemented
        return self._id_to_token == other._id_to_token


@dataclass(frozen=True)
class Snapshot:
    """A tokenized, timestamped corpus slice.

    ``documents`` preserves document boundaries (needed for deduplication and
    splitting); ``sentences`` is the flattened sentence list that counting
    operates on.
    """

    timestamp_label: str
    documents: tuple[Document, ...]
    vocab: Vocab = field(compare=False)

    @classmethod
    def from_documents(
        cls, documents: Iterable[Sequence[Sequence[str]]], timestamp_label: str
    ) -> "Snapshot":
        docs = tuple(
            tuple(tuple(s) for s in doc if len(s) > 0) for doc in documents
        )
        docs = tuple(d for d in docs if d)
        vocab = Vocab(t for doc in docs for sent in doc for t in sent)
        return cls(timestamp_label=timestamp_label, documents=docs, vocab=vocab)

    @classmethod
    def from_sentences(
        cls, sentences: Iterable[Sequence[str]], timestamp_label: str
    ) -> "Snapshot":
        """Build a snapshot where each sentence is its own document."""
        return cls.from_documents(([s] for s in sentences), timestamp_label)

    @property
    def sentences(self) -> tuple[Sentence, ...]:
        return tuple(s for doc in self.documents for s in doc)

    @property
    def n_sentences(self) -> int:
        return sum(len(doc) for doc in self.documents)

    @property
    def n_documents(self) -> int:
        return len(self.documents)

    def __post_init__(self):
        for doc in self.documents:
            for sent in doc:
                if not sent:
                    raise CorpusError("snapshot contains an empty sentence")


@dataclass(frozen=True)
class SplitSpec:
    """Fractions for a train/dev/test document split plus the shuffle seed."""

    train_fraction: float = 0.7
    dev_fraction: float = 0.1
    test_fraction: float = 0.2
    seed: int = 123

    def __post_init__(self):
        fractions = (self.train_fraction, self.dev_fraction, self.test_fraction)
        if any(f < 0 for f in fractions):
            raise CorpusError("split fractions must be non-negative")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise CorpusError(
                f"split fractions must sum to 1, got {sum(fractions)!r}"
            )


def load_snapshot(path: str | Path, format: str, timestamp_label: str) -> Snapshot:
    """Load a snapshot from a text file.

    ``format`` is ``"lines"`` (one document per line) or ``"records"``
    (newline-delimited JSON records with a required ``text`` field; any
    ``timestamp`` field is ignored, the label comes from the caller).
    """
    if format not in ("lines", "records"):
        raise CorpusError(f"unknown snapshot format {format!r}")
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc

    documents: list[list[list[str]]] = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        if format == "lines":
            text = line
        else:
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed record: {exc}") from exc
            if not isinstance(record, dict) or "text" not in record:
                raise CorpusError(f"{path}:{lineno}: record lacks a 'text' field")
            text = record["text"]
            if not isinstance(text, str):
                raise CorpusError(f"{path}:{lineno}: 'text' field is not a string")
        sentences = tokenize_document(text)
        if sentences:
            documents.append(sentences)

    if not documents:
        raise CorpusError(f"empty corpus: {path}")
    return Snapshot.from_documents(documents, timestamp_label)


def preprocess(s: Snapshot, min_words: int = 10) -> Snapshot:
    """Drop exact-duplicate documents (first kept) and short documents.

    A document is short when its total token count across sentences is below
    ``min_words``. The vocabulary is rebuilt from the survivors.
    """
    if min_words < 1:
        raise CorpusError("min_words must be >= 1")
    seen: set[Document] = set()
    kept: list[Document] = []
    for doc in s.documents:
        if doc in seen:
            continue
        seen.add(doc)
        if sum(len(sent) for sent in doc) < min_words:
            continue
        kept.append(doc)
    if not kept:
        raise CorpusError("empty corpus after preprocessing")
    return Snapshot.from_documents(kept, s.timestamp_label)


def _split_sizes(n: int, spec: SplitSpec) -> tuple[int, int, int]:
    # Largest-remainder apportionment; remainder ties resolved in
    # train > dev > test order so leftovers gravitate toward train.
    fractions = (spec.train_fraction, spec.dev_fraction, spec.test_fraction)
    targets = [f * n for f in fractions]
    sizes = [math.floor(t) for t in targets]
    leftover = n - sum(sizes)
    order = sorted(range(3), key=lambda i: (-(targets[i] - sizes[i]), i))
    for i in order[:leftover]:
        sizes[i] += 1
    return sizes[0], sizes[1], sizes[2]


def split(s: Snapshot, spec: SplitSpec) -> tuple[Snapshot, Snapshot, Snapshot]:
    """Partition documents into train/dev/test snapshots.

    The partition is disjoint and exhaustive; identical seeds produce
    identical assignments. Empty parts are returned as snapshots with zero
    documents.
    """
    if s.n_documents == 0:
        raise CorpusError("cannot split an empty snapshot")
    n_train, n_dev, _ = _split_sizes(s.n_documents, spec)
    indices = list(range(s.n_documents))
    random.Random(spec.seed).shuffle(indices)
    train_idx = sorted(indices[:n_train])
    dev_idx = sorted(indices[n_train : n_train + n_dev])
    test_idx = sorted(indices[n_train + n_dev :])

    def take(idx: list[int]) -> Snapshot:
        docs = tuple(s.documents[i] for i in idx)
        vocab = Vocab(t for doc in docs for sent in doc for t in sent)
        return Snapshot(timestamp_label=s.timestamp_label, documents=docs, vocab=vocab)

    return take(train_idx), take(dev_idx), take(test_idx)

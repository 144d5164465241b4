"""Sentence-level frequency and co-occurrence statistics, PMI, pivot scores.

All counts use sentence-set semantics: a token occurring three times inside
one sentence counts once, and a pair co-occurs once per sentence containing
both members. The co-occurrence window is the sentence itself.
"""

from __future__ import annotations

import math
from collections import Counter
from itertools import combinations
from pathlib import Path
from typing import Iterable

from .corpus import Snapshot


class FrequencyTable:
    """Per-token sentence-occurrence counts over one snapshot."""

    def __init__(self, counts: Counter[str] | None = None, n_sentences: int = 0):
        self._counts: Counter[str] = counts if counts is not None else Counter()
        self.n_sentences = n_sentences

    def get(self, token: str) -> int:
        return self._counts.get(token, 0)

    def tokens(self) -> Iterable[str]:
        return self._counts.keys()

    def __len__(self) -> int:
        return len(self._counts)

    def merge(self, other: "FrequencyTable") -> "FrequencyTable":
        """Combine partition counts; associative and commutative."""
        merged = Counter(self._counts)
        merged.update(other._counts)
        return FrequencyTable(merged, self.n_sentences + other.n_sentences)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FrequencyTable):
            return NotImplemented
        return self._counts == other._counts and self.n_sentences == other.n_sentences


class CoocTable:
    """Sparse unordered-pair co-occurrence counts, keyed (a, b) with a < b."""

    def __init__(self, counts: Counter[tuple[str, str]] | None = None):
        self._counts: Counter[tuple[str, str]] = counts if counts is not None else Counter()

    @staticmethod
    def _key(a: str, b: str) -> tuple[str, str]:
        return (a, b) if a <= b else (b, a)

    def get(self, a: str, b: str) -> int:
        return self._counts.get(self._key(a, b), 0)

    def pairs(self) -> Iterable[tuple[str, str]]:
        return self._counts.keys()

    def partners(self, token: str) -> Iterable[str]:
        """Tokens having a stored co-occurrence with ``token``."""
        for a, b in self._counts:
            if a == token:
                yield b
            elif b == token:
                yield a

    def __len__(self) -> int:
        return len(self._counts)

    def merge(self, other: "CoocTable") -> "CoocTable":
        merged = Counter(self._counts)
        merged.update(other._counts)
        return CoocTable(merged)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CoocTable):
            return NotImplemented
        return self._counts == other._counts


def count(s: Snapshot) -> tuple[FrequencyTable, CoocTable]:
    """Count sentence occurrences and within-sentence co-occurrences.

    Self pairs (x, x) are never stored; a word cannot be its own anchor.
    """
    sentences = s.sentences
    if not sentences:
        raise ValueError("cannot count an empty snapshot")
    freq: Counter[str] = Counter()
    cooc: Counter[tuple[str, str]] = Counter()
    for sentence in sentences:
        unique = sorted(set(sentence))
        freq.update(unique)
        for pair in combinations(unique, 2):
            cooc[pair] += 1
    return FrequencyTable(freq, len(sentences)), CoocTable(cooc)


def pmi(w: str, x: str, freq: FrequencyTable, cooc: CoocTable) -> float | None:
    """Pointwise mutual information of two tokens, natural log.

    Returns None (undefined) when the pair never co-occurs or either marginal
    is zero; such pairs are excluded from anchor ranking rather than treated
    as negative infinity.
    """
    joint = cooc.get(w, x)
    fw = freq.get(w)
    fx = freq.get(x)
    if joint == 0 or fw == 0 or fx == 0:
        return None
    return math.log(joint * freq.n_sentences / (fw * fx))


def pivot_score(w: str, freq1: FrequencyTable, freq2: FrequencyTable) -> int:
    """Cross-snapshot suitability of a word: its minimum sentence frequency."""
    return min(freq1.get(w), freq2.get(w))


def save_frequencies(freq: FrequencyTable, path: str | Path) -> None:
    """Dump ``token <TAB> count`` rows, tokens sorted lexicographically."""
    with open(path, "w", encoding="utf-8") as sink:
        for token in sorted(freq.tokens()):
            sink.write(f"{token}\t{freq.get(token)}\n")


def save_cooccurrences(cooc: CoocTable, path: str | Path) -> None:
    """Dump ``tokenA <TAB> tokenB <TAB> count`` rows with A < B, sorted."""
    with open(path, "w", encoding="utf-8") as sink:
        for a, b in sorted(cooc.pairs()):
            sink.write(f"{a}\t{b}\t{cooc.get(a, b)}\n")

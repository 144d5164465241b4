"""Pivot selection, anchor sets, and the three tuple scoring methods.

A pivot is a word frequent in both snapshots; its anchors are the words most
associated with it (top PMI) inside each snapshot separately. Tuples
(pivot, anchor@T1, anchor@T2) are ranked by cross-snapshot frequency, by
anchor-set diversity, or by an embedding contrast score.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .embeddings import EmbeddingTable, cosine
from .stats import CoocTable, FrequencyTable, pivot_score, pmi

#: Anchors rarer than this in their snapshot are ignored; mitigates the
#: rare-word bias of PMI.
DEFAULT_MIN_ANCHOR_FREQ = 5

#: Default anchors-per-side capacity.
DEFAULT_ANCHOR_CAPACITY = 10


@dataclass(frozen=True)
class AnchorSet:
    """A pivot's top-PMI anchors in each snapshot, PMI-descending."""

    pivot: str
    anchors_t1: tuple[tuple[str, float], ...]
    anchors_t2: tuple[tuple[str, float], ...]
    m: int

    def tokens_t1(self) -> tuple[str, ...]:
        return tuple(t for t, _ in self.anchors_t1)

    def tokens_t2(self) -> tuple[str, ...]:
        return tuple(t for t, _ in self.anchors_t2)


@dataclass(frozen=True)
class ScoredTuple:
    w: str
    u: str
    v: str
    score: float
    method: str


@dataclass(frozen=True)
class TupleSet:
    """Score-descending tuples for one method, truncated to ``k``."""

    method: str
    tuples: tuple[ScoredTuple, ...]
    k: int

    def __len__(self) -> int:
        return len(self.tuples)

    def __iter__(self):
        return iter(self.tuples)


def select_pivots(
    freq1: FrequencyTable, freq2: FrequencyTable, top_k: int
) -> list[str]:
    """Top words by min cross-snapshot frequency; zero scores excluded.

    Ties break lexicographically.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    scored = [
        (token, pivot_score(token, freq1, freq2))
        for token in freq1.tokens()
        if freq2.get(token) > 0
    ]
    scored = [(t, s) for t, s in scored if s > 0]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return [t for t, _ in scored[:top_k]]


def build_anchor_set(
    w: str,
    stats1: tuple[FrequencyTable, CoocTable],
    stats2: tuple[FrequencyTable, CoocTable],
    m: int = DEFAULT_ANCHOR_CAPACITY,
    min_anchor_freq: int = DEFAULT_MIN_ANCHOR_FREQ,
) -> AnchorSet:
    """Top-m anchors of ``w`` per snapshot by PMI, high to low.

    Candidates must co-occur with the pivot (defined PMI) and clear the
    frequency floor. A side with no candidates comes back empty; tuple
    builders skip such pivots.
    """

    def side(stats: tuple[FrequencyTable, CoocTable]) -> tuple[tuple[str, float], ...]:
        freq, cooc = stats
        ranked = []
        for candidate in cooc.partners(w):
            if candidate == w or freq.get(candidate) < min_anchor_freq:
                continue
            value = pmi(w, candidate, freq, cooc)
            if value is None:
                continue
            ranked.append((candidate, value))
        ranked.sort(key=lambda item: (-item[1], item[0]))
        return tuple(ranked[:m])

    return AnchorSet(pivot=w, anchors_t1=side(stats1), anchors_t2=side(stats2), m=m)


def _expand(
    pivots: Sequence[str],
    anchor_sets: Mapping[str, AnchorSet],
    scores: Mapping[str, float],
    k: int,
    method: str,
) -> TupleSet:
    """Cross anchors per pivot in rank order, truncating at k tuples."""
    out: list[ScoredTuple] = []
    for w in pivots:
        anchors = anchor_sets.get(w)
        if anchors is None:
            continue
        for u, _ in anchors.anchors_t1:
            for v, _ in anchors.anchors_t2:
                if u == v:
                    continue
                out.append(ScoredTuple(w=w, u=u, v=v, score=float(scores[w]), method=method))
                if len(out) == k:
                    return TupleSet(method=method, tuples=tuple(out), k=k)
    return TupleSet(method=method, tuples=tuple(out), k=k)


def build_freq_tuples(
    pivots: Sequence[str],
    anchor_sets: Mapping[str, AnchorSet],
    k: int,
    freq1: FrequencyTable,
    freq2: FrequencyTable,
) -> TupleSet:
    """All anchor pairings per pivot, pivots in frequency-rank order.

    A tuple inherits its pivot's min-frequency score; within one pivot the
    expansion is ordered by (u-rank, v-rank).
    """
    scores = {w: float(pivot_score(w, freq1, freq2)) for w in pivots}
    return _expand(pivots, anchor_sets, scores, k, "freq")


def diversity(anchor_set: AnchorSet) -> float:
    """Dissimilarity of the two anchor sets: 1 minus their Jaccard overlap."""
    union = set(anchor_set.tokens_t1()) | set(anchor_set.tokens_t2())
    if not union:
        raise ValueError(f"diversity undefined for {anchor_set.pivot!r}: both anchor sets empty")
    inter = set(anchor_set.tokens_t1()) & set(anchor_set.tokens_t2())
    return 1.0 - len(inter) / len(union)


def build_div_tuples(
    pivots_by_freq: Sequence[str],
    anchor_sets: Mapping[str, AnchorSet],
    k: int,
    freq1: FrequencyTable,
    freq2: FrequencyTable,
) -> TupleSet:
    """Re-rank frequency-selected pivots by anchor-set diversity.

    Ties break toward the higher-frequency pivot, then lexicographically.
    Pivots whose anchor sets are both empty are skipped.
    """
    ranked = []
    for w in pivots_by_freq:
        anchors = anchor_sets.get(w)
        if anchors is None or (not anchors.anchors_t1 and not anchors.anchors_t2):
            continue
        ranked.append((w, diversity(anchors)))
    ranked.sort(
        key=lambda item: (-item[1], -pivot_score(item[0], freq1, freq2), item[0])
    )
    pivots = [w for w, _ in ranked]
    scores = {w: d for w, d in ranked}
    return _expand(pivots, anchor_sets, scores, k, "div")


def context_score(
    w: str, u: str, v: str, emb1: EmbeddingTable, emb2: EmbeddingTable
) -> float:
    """Embedding contrast: reward (w,u) closeness at T1 and (w,v) at T2,
    penalize the crossed associations. Absent words contribute zero terms."""
    w1, w2 = emb1.lookup(w), emb2.lookup(w)
    return (
        cosine(w1, emb1.lookup(u))
        + cosine(w2, emb2.lookup(v))
        - cosine(w2, emb2.lookup(u))
        - cosine(w1, emb1.lookup(v))
    )


def build_cont_tuples(
    candidates: TupleSet,
    emb1: EmbeddingTable,
    emb2: EmbeddingTable,
    k: int,
) -> TupleSet:
    """Re-score candidate tuples by embedding contrast and keep the top k.

    Ties break lexicographically on (w, u, v).
    """
    if len(candidates) == 0:
        raise ValueError("candidate tuple set is empty")
    rescored = [
        ScoredTuple(w=t.w, u=t.u, v=t.v, score=context_score(t.w, t.u, t.v, emb1, emb2), method="cont")
        for t in candidates
    ]
    rescored.sort(key=lambda t: (-t.score, t.w, t.u, t.v))
    return TupleSet(method="cont", tuples=tuple(rescored[:k]), k=k)


def save_tuples(tuple_set: TupleSet, path: str | Path) -> None:
    """TSV dump ``rank w u v score method``; scores keep 17 significant digits
    so the file reads back losslessly."""
    with open(path, "w", encoding="utf-8") as sink:
        for rank, t in enumerate(tuple_set, start=1):
            sink.write(f"{rank}\t{t.w}\t{t.u}\t{t.v}\t{format(t.score, '.17g')}\t{t.method}\n")


def load_tuples(path: str | Path, k: int | None = None) -> TupleSet:
    """Read a tuple TSV back; ``k`` defaults to the row count."""
    path = Path(path)
    tuples: list[ScoredTuple] = []
    method = ""
    with open(path, "r", encoding="utf-8") as source:
        for lineno, line in enumerate(source, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 columns, found {len(fields)}")
            _, w, u, v, score, method = fields
            tuples.append(ScoredTuple(w=w, u=u, v=v, score=float(score), method=method))
    return TupleSet(method=method, tuples=tuple(tuples), k=k if k is not None else len(tuples))

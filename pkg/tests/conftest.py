"""Shared fixtures: planted-shift corpora and small embedding tables."""

from __future__ import annotations

import numpy as np
import pytest

from tempadapt import corpus, embeddings


def planted_snapshots(
    pivot_sentences: int = 20, distractor_pairs: int = 20, per_pair: int = 10
) -> tuple[corpus.Snapshot, corpus.Snapshot]:
    """Two snapshots where 'mask' co-occurs only with 'hide' at T1 and only
    with 'vaccine' at T2, amid distractor pairs whose usage never shifts."""

    def side(anchor: str, label: str) -> corpus.Snapshot:
        sentences = [["mask", anchor]] * pivot_sentences
        for i in range(distractor_pairs):
            sentences.extend([[f"d{i:02d}", f"e{i:02d}"]] * per_pair)
        return corpus.Snapshot.from_sentences(sentences, label)

    return side("hide", "2010"), side("vaccine", "2020")


def orthogonal_tables() -> tuple[embeddings.EmbeddingTable, embeddings.EmbeddingTable]:
    """Hand-crafted tables realizing the maximal contrast for the planted
    tuple: (mask, hide) aligned at T1, (mask, vaccine) aligned at T2, the
    crossed pairs orthogonal."""
    e1 = np.array([1.0, 0.0, 0.0, 0.0])
    e2 = np.array([0.0, 1.0, 0.0, 0.0])
    e3 = np.array([0.0, 0.0, 1.0, 0.0])
    e4 = np.array([0.0, 0.0, 0.0, 1.0])
    emb1 = embeddings.EmbeddingTable("2010", 4)
    emb1.put("mask", e1, 1)
    emb1.put("hide", e1, 1)
    emb1.put("vaccine", e3, 1)
    emb2 = embeddings.EmbeddingTable("2020", 4)
    emb2.put("mask", e2, 1)
    emb2.put("vaccine", e2, 1)
    emb2.put("hide", e4, 1)
    return emb1, emb2


def write_planted_corpus(
    directory,
    pivot_docs: int = 30,
    distractor_pairs: int = 15,
    per_pair: int = 10,
):
    """Write two line-format corpus files with a planted usage shift.

    Documents carry ten tokens (so the default length filter keeps them) and
    unique one-off filler words that the anchor frequency floor prunes away,
    leaving 'mask' anchored to 'hide' at T1 and 'vaccine' at T2.
    """

    def doc(first, second, tag, i):
        fillers = " ".join(f"{tag}{i:03d}{c}" for c in "abcdefgh")
        return f"{first} {second} {fillers}"

    def side(anchor, stem):
        lines = [doc("mask", anchor, f"{stem}m", i) for i in range(pivot_docs)]
        for j in range(distractor_pairs):
            lines.extend(
                doc(f"d{j:02d}", f"e{j:02d}", f"{stem}{j:02d}", i)
                for i in range(per_pair)
            )
        return "\n".join(lines) + "\n"

    c1 = directory / "c1.txt"
    c2 = directory / "c2.txt"
    c1.write_text(side("hide", "p"), encoding="utf-8")
    c2.write_text(side("vaccine", "q"), encoding="utf-8")
    return c1, c2


@pytest.fixture()
def planted():
    return planted_snapshots()


@pytest.fixture()
def planted_embeddings():
    return orthogonal_tables()


@pytest.fixture()
def planted_files(tmp_path):
    return write_planted_corpus(tmp_path)

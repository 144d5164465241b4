"""Per-occurrence contextual embedding extraction.

For each token of interest, up to ``occurrence_cap`` occurrences are chosen
by seeded reservoir sampling over the sentence export; each occurrence is
embedded with the MLM's final hidden layer, averaging the subtoken vectors
into one whole-word vector.
"""

from __future__ import annotations

import random
from pathlib import Path
from typing import Iterable, Sequence

import torch

from .config import BridgeConfig
from .formats import read_sentences, write_embedding_records
from .models import load_mlm


def _sample_occurrences(
    sentences: Sequence[Sequence[str]], token: str, cap: int, seed: int
) -> list[tuple[int, int]]:
    """Reservoir-sample (sentence, position) pairs for one token."""
    rng = random.Random(f"{seed}:{token}")
    reservoir: list[tuple[int, int]] = []
    seen = 0
    for i, sentence in enumerate(sentences):
        for j, word in enumerate(sentence):
            if word != token:
                continue
            seen += 1
            if len(reservoir) < cap:
                reservoir.append((i, j))
            else:
                slot = rng.randrange(seen)
                if slot < cap:
                    reservoir[slot] = (i, j)
    reservoir.sort()
    return reservoir


def _embed_word(tokenizer, mlm, sentence: Sequence[str], position: int, device: str):
    encoded = tokenizer(
        list(sentence),
        is_split_into_words=True,
        return_tensors="pt",
        truncation=True,
    ).to(device)
    with torch.no_grad():
        hidden = mlm(**encoded, output_hidden_states=True).hidden_states[-1][0]
    word_ids = encoded.word_ids()
    rows = [k for k, w in enumerate(word_ids) if w == position]
    if not rows:
        return None  # word truncated away
    return hidden[rows].mean(dim=0).cpu().numpy()


def extract_embeddings(
    sentences_path: str | Path,
    tokens: Iterable[str],
    config: BridgeConfig,
    out_path: str | Path,
    snapshot_label: str,
) -> int:
    """Write the per-occurrence exchange file; returns the record count.

    Tokens that never occur contribute no records: the core's lookup then
    resolves them to the zero vector.
    """
    sentences = read_sentences(sentences_path)
    tokenizer, mlm = load_mlm(config.model, config.device)
    records: list[tuple[str, list[float]]] = []
    dimension = mlm.config.hidden_size
    for token in sorted(set(tokens)):
        occurrences = _sample_occurrences(
            sentences, token, config.occurrence_cap, config.seed
        )
        for i, j in occurrences:
            vector = _embed_word(tokenizer, mlm, sentences[i], j, config.device)
            if vector is not None:
                records.append((token, [float(v) for v in vector]))
    return write_embedding_records(out_path, snapshot_label, dimension, records)

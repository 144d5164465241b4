"""Tiny local models and synthetic corpora for bridge tests.

Everything is built offline: a word-level vocab file (with two pieces so one
word exercises subtoken averaging), a small randomly initialized MLM, and a
small seq2seq scorer sharing the same tokenizer.
"""

from __future__ import annotations

import random

import pytest
import torch
from transformers import (
    BertConfig,
    BertForMaskedLM,
    BertTokenizer,
    T5Config,
    T5ForConditionalGeneration,
)

SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
TEMPLATE_WORDS = [
    "is", "associated", "with", "in", "whereas", "it", "the", "meaning",
    "of", "changed", "from", "to", "respectively", ",", ".",
]
PIVOT_WORDS = ["mask", "hide", "vac", "##cine", "2010", "2020"]
POOL_WORDS = [
    "people", "street", "crowd", "daily", "routine", "common", "practice",
    "city", "winter", "summer", "health", "doctor", "news", "report",
    "story", "market", "shop", "food", "water", "home", "work", "school",
    "child", "family", "friend", "travel", "train", "game", "music", "book",
]
VOCAB = SPECIALS + TEMPLATE_WORDS + PIVOT_WORDS + POOL_WORDS


@pytest.fixture(scope="session")
def vocab_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("vocab") / "vocab.txt"
    path.write_text("\n".join(VOCAB) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def tokenizer(vocab_file):
    return BertTokenizer(str(vocab_file), do_lower_case=True)


@pytest.fixture(scope="session")
def tiny_mlm_dir(tmp_path_factory, tokenizer):
    torch.manual_seed(7)
    model = BertForMaskedLM(
        BertConfig(
            vocab_size=len(VOCAB),
            hidden_size=32,
            num_hidden_layers=2,
            num_attention_heads=2,
            intermediate_size=64,
            max_position_embeddings=64,
        )
    )
    path = tmp_path_factory.mktemp("models") / "tiny-mlm"
    model.save_pretrained(path)
    tokenizer.save_pretrained(path)
    return path


@pytest.fixture(scope="session")
def tiny_seq2seq_dir(tmp_path_factory, tokenizer):
    torch.manual_seed(11)
    model = T5ForConditionalGeneration(
        T5Config(
            vocab_size=len(VOCAB),
            d_model=32,
            d_ff=64,
            d_kv=16,
            num_layers=2,
            num_heads=2,
            decoder_start_token_id=tokenizer.pad_token_id,
            pad_token_id=tokenizer.pad_token_id,
        )
    )
    path = tmp_path_factory.mktemp("models") / "tiny-seq2seq"
    model.save_pretrained(path)
    tokenizer.save_pretrained(path)
    return path


def synthesize_snapshots(pivot_sentences=50, pool_sentences=250, seed=13):
    """Two pseudo-snapshot corpora (one document per line, ten words each)
    where 'mask' keeps company with 'hide' early on and 'vaccine' later."""

    def side(anchor, salt):
        rng = random.Random(seed + salt)
        lines = set()
        while len(lines) < pivot_sentences:
            words = ["mask", anchor] + rng.sample(POOL_WORDS, 8)
            rng.shuffle(words)
            lines.add(" ".join(words))
        while len(lines) < pivot_sentences + pool_sentences:
            lines.add(" ".join(rng.sample(POOL_WORDS, 10)))
        return sorted(lines)

    return side("hide", 0), side("vaccine", 1)


@pytest.fixture(scope="session")
def snapshot_files(tmp_path_factory):
    c1_lines, c2_lines = synthesize_snapshots()
    directory = tmp_path_factory.mktemp("corpus")
    c1 = directory / "c1.txt"
    c2 = directory / "c2.txt"
    c1.write_text("\n".join(c1_lines) + "\n", encoding="utf-8")
    c2.write_text("\n".join(c2_lines) + "\n", encoding="utf-8")
    return c1, c2

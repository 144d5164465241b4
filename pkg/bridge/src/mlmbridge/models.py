"""Model loading and determinism helpers."""

from __future__ import annotations

import random

import numpy as np
import torch
from transformers import (
    AutoModelForMaskedLM,
    AutoModelForSeq2SeqLM,
    AutoTokenizer,
)


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)


def load_mlm(model: str, device: str = "cpu"):
    tokenizer = AutoTokenizer.from_pretrained(model)
    mlm = AutoModelForMaskedLM.from_pretrained(model).to(device)
    mlm.eval()
    return tokenizer, mlm


def load_seq2seq(model: str, device: str = "cpu"):
    tokenizer = AutoTokenizer.from_pretrained(model)
    lm = AutoModelForSeq2SeqLM.from_pretrained(model).to(device)
    lm.eval()
    return tokenizer, lm

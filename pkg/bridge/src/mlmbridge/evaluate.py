"""Masked language modelling perplexity.

Each model token of a sentence is masked once in turn (specials excluded);
perplexity is the exponential of the mean negative log-likelihood of the
masked-out tokens across all positions of all sentences.
"""

from __future__ import annotations

import math
from typing import Sequence

import torch


def masked_perplexity(
    model,
    tokenizer,
    sentences: Sequence[str],
    device: str = "cpu",
    max_positions_per_sentence: int | None = None,
) -> float:
    """Leave-one-out masked perplexity; >= 1 and deterministic.

    ``model`` is any callable accepting input_ids/attention_mask and
    returning an object with ``logits``.
    """
    if not sentences:
        raise ValueError("test set is empty")
    special_ids = set(tokenizer.all_special_ids)
    mask_id = tokenizer.mask_token_id
    total_nll = 0.0
    total_positions = 0
    for sentence in sentences:
        ids = tokenizer(sentence, truncation=True).input_ids
        positions = [k for k, t in enumerate(ids) if t not in special_ids]
        if max_positions_per_sentence is not None:
            positions = positions[:max_positions_per_sentence]
        if not positions:
            continue
        batch = torch.tensor([ids] * len(positions), device=device)
        for row, k in enumerate(positions):
            batch[row, k] = mask_id
        attention = torch.ones_like(batch)
        with torch.no_grad():
            logits = model(input_ids=batch, attention_mask=attention).logits
        logprobs = torch.log_softmax(logits, dim=-1)
        for row, k in enumerate(positions):
            total_nll -= float(logprobs[row, k, ids[k]])
        total_positions += len(positions)
    if total_positions == 0:
        raise ValueError("no scoreable positions in the test set")
    return math.exp(total_nll / total_positions)

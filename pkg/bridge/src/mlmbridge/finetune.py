"""Masked fine-tuning of an MLM on the emitted training file.

The file's word-level ``mask_index`` maps to whole-word masking: every
subtoken of that word is replaced by the mask token and only those positions
carry labels.
"""

from __future__ import annotations

import json
import logging
import random
from pathlib import Path

import torch
from torch.optim import AdamW
from torch.optim.lr_scheduler import LambdaLR

from .config import BridgeConfig
from .formats import TrainingRecord, read_training_file
from .models import load_mlm, seed_everything

logger = logging.getLogger(__name__)


def featurize(records: list[TrainingRecord], tokenizer) -> list[dict]:
    """Tokenize records and apply whole-word masking at ``mask_index``."""
    features = []
    for record in records:
        words = record.text.split()
        encoded = tokenizer(words, is_split_into_words=True, truncation=True)
        word_ids = encoded.word_ids()
        span = [k for k, w in enumerate(word_ids) if w == record.mask_index]
        if not span:
            logger.warning("masked word truncated away; skipping one instance")
            continue
        input_ids = list(encoded.input_ids)
        labels = [-100] * len(input_ids)
        for k in span:
            labels[k] = input_ids[k]
            input_ids[k] = tokenizer.mask_token_id
        features.append({"input_ids": input_ids, "labels": labels})
    return features


def _pad_batch(batch: list[dict], pad_id: int, device: str) -> dict[str, torch.Tensor]:
    width = max(len(f["input_ids"]) for f in batch)
    input_ids, attention, labels = [], [], []
    for f in batch:
        n = len(f["input_ids"])
        input_ids.append(f["input_ids"] + [pad_id] * (width - n))
        attention.append([1] * n + [0] * (width - n))
        labels.append(f["labels"] + [-100] * (width - n))
    return {
        "input_ids": torch.tensor(input_ids, device=device),
        "attention_mask": torch.tensor(attention, device=device),
        "labels": torch.tensor(labels, device=device),
    }


def finetune(config: BridgeConfig, train_file: str | Path, out_dir: str | Path) -> dict:
    """Fine-tune and checkpoint the model; returns the training history."""
    records = read_training_file(train_file)
    if not records:
        raise ValueError(f"training file {train_file} has no instances")
    seed_everything(config.seed)
    tokenizer, model = load_mlm(config.model, config.device)
    features = featurize(records, tokenizer)
    if not features:
        raise ValueError("no usable training instances after tokenization")
    model.train()

    optimizer = AdamW(
        model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay
    )
    batches_per_epoch = (len(features) + config.batch_size - 1) // config.batch_size
    total_steps = batches_per_epoch * config.epochs
    warmup_steps = int(config.warmup_fraction * total_steps)

    def lr_lambda(step: int) -> float:
        if warmup_steps and step < warmup_steps:
            return (step + 1) / warmup_steps
        if config.linear_decay and total_steps > warmup_steps:
            remaining = total_steps - step
            return max(0.0, remaining / (total_steps - warmup_steps))
        return 1.0

    scheduler = LambdaLR(optimizer, lr_lambda)
    rng = random.Random(config.seed)
    history: list[float] = []
    for epoch in range(config.epochs):
        order = list(range(len(features)))
        rng.shuffle(order)
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = [features[i] for i in order[start : start + config.batch_size]]
            inputs = _pad_batch(batch, tokenizer.pad_token_id, config.device)
            loss = model(**inputs).loss
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"training diverged: non-finite loss at epoch {epoch}, "
                    f"step {start // config.batch_size}"
                )
            loss.backward()
            optimizer.step()
            scheduler.step()
            optimizer.zero_grad()
            epoch_loss += float(loss.detach())
        history.append(epoch_loss / batches_per_epoch)
        logger.info("epoch %d: mean loss %.4f", epoch, history[-1])

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)
    config.dump(out_dir / "bridge_config.json")
    summary = {"epoch_losses": history, "instances": len(features), "steps": total_steps}
    (out_dir / "training_log.json").write_text(
        json.dumps(summary, indent=2) + "\n", encoding="utf-8"
    )
    return summary

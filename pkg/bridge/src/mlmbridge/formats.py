"""Readers and writers for the core's interface file formats.

These mirror the documented formats exactly: the embedding exchange file
(tab-separated, EMB header, 9-significant-digit floats), the masked training
file (NDJSON with text/mask_index/label), and the results TSV.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence


@dataclass(frozen=True)
class TrainingRecord:
    text: str
    mask_index: int
    label: str


def read_training_file(path: str | Path) -> list[TrainingRecord]:
    records = []
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{lineno}: malformed record: {exc}") from exc
        try:
            record = TrainingRecord(
                text=str(data["text"]),
                mask_index=int(data["mask_index"]),
                label=str(data["label"]),
            )
        except KeyError as exc:
            raise ValueError(f"{path}:{lineno}: missing field {exc}") from exc
        tokens = record.text.split()
        if not 0 <= record.mask_index < len(tokens):
            raise ValueError(f"{path}:{lineno}: mask_index out of range")
        if tokens[record.mask_index] != record.label:
            raise ValueError(f"{path}:{lineno}: label does not match masked token")
        records.append(record)
    return records


def read_sentences(path: str | Path) -> list[list[str]]:
    """Snapshot sentence export: one sentence per line, space-joined tokens."""
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        tokens = line.split()
        if tokens:
            out.append(tokens)
    return out


def write_embedding_records(
    path: str | Path,
    snapshot_label: str,
    dimension: int,
    records: Iterable[tuple[str, Sequence[float]]],
) -> int:
    """Per-occurrence exchange file; returns the number of records written."""
    records = list(records)
    with open(path, "w", encoding="utf-8") as sink:
        sink.write(f"EMB\t{snapshot_label}\t{dimension}\t{len(records)}\n")
        for token, vector in records:
            if len(vector) != dimension:
                raise ValueError(f"vector for {token!r} has wrong dimension")
            if not all(math.isfinite(v) for v in vector):
                raise ValueError(f"non-finite component in vector for {token!r}")
            floats = "\t".join(format(float(v), ".9g") for v in vector)
            sink.write(f"{token}\t{floats}\n" if floats else f"{token}\n")
    return len(records)


def write_results(
    path: str | Path,
    rows: Iterable[tuple[str, str, str, str, int, float]],
    append: bool = False,
) -> None:
    """Results TSV rows: dataset, model, method, template, k, perplexity."""
    mode = "a" if append else "w"
    with open(path, mode, encoding="utf-8") as sink:
        for dataset, model, method, template, k, perplexity in rows:
            if perplexity <= 0:
                raise ValueError("perplexity must be positive")
            sink.write(
                f"{dataset}\t{model}\t{method}\t{template}\t{k}\t{format(perplexity, '.6g')}\n"
            )

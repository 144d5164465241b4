"""Per-word, per-snapshot averaged embeddings and the exchange file format.

The neural side of the system emits one vector per sampled word occurrence;
this module averages those records into a single vector per word and serves
lookups. Words absent from a snapshot resolve to the zero vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np


class EmbeddingFormatError(ValueError):
    """Raised for malformed exchange files or inconsistent dimensions."""


@dataclass(frozen=True)
class ContextualRecord:
    """One occurrence-level embedding of a token in one snapshot."""

    token: str
    snapshot_label: str
    vector: tuple[float, ...]


class EmbeddingTable:
    """Token -> averaged vector for one snapshot, with occurrence counts."""

    def __init__(self, snapshot_label: str, dimension: int):
        self.snapshot_label = snapshot_label
        self.dimension = dimension
        self._vectors: dict[str, np.ndarray] = {}
        self._counts: dict[str, int] = {}

    def put(self, token: str, vector: np.ndarray, count: int) -> None:
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.dimension,):
            raise EmbeddingFormatError(
                f"vector for {token!r} has dimension {vector.shape}, expected {self.dimension}"
            )
        if not np.all(np.isfinite(vector)):
            raise EmbeddingFormatError(f"non-finite component in vector for {token!r}")
        self._vectors[token] = vector
        self._counts[token] = count

    def lookup(self, token: str) -> np.ndarray:
        """Averaged vector for ``token``; zero vector when absent."""
        vec = self._vectors.get(token)
        if vec is None:
            return np.zeros(self.dimension)
        return vec

    def occurrence_count(self, token: str) -> int:
        return self._counts.get(token, 0)

    def __contains__(self, token: str) -> bool:
        return token in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)

    def tokens(self) -> Iterable[str]:
        return self._vectors.keys()

    def __eq__(self, other: object) -> bool:
        # Occurrence counts are provenance metadata the exchange format does
        # not carry, so equality is over label, dimension, and vectors only.
        if not isinstance(other, EmbeddingTable):
            return NotImplemented
        if self.snapshot_label != other.snapshot_label or self.dimension != other.dimension:
            return False
        if set(self._vectors) != set(other._vectors):
            return False
        return all(np.array_equal(self._vectors[t], other._vectors[t]) for t in self._vectors)


def average(records: Iterable[ContextualRecord], snapshot_label: str) -> EmbeddingTable:
    """Arithmetic mean of each token's record vectors (compensated summation).

    Kahan accumulation keeps the result order-independent to well under 1e-12
    per component. Zero records yield a valid empty table of dimension 0.
    """
    sums: dict[str, np.ndarray] = {}
    comps: dict[str, np.ndarray] = {}
    counts: dict[str, int] = {}
    dimension: int | None = None

    for i, record in enumerate(records):
        if record.snapshot_label != snapshot_label:
            raise EmbeddingFormatError(
                f"record {i} labelled {record.snapshot_label!r}, expected {snapshot_label!r}"
            )
        vec = np.asarray(record.vector, dtype=np.float64)
        if dimension is None:
            dimension = vec.shape[0]
        elif vec.shape != (dimension,):
            raise EmbeddingFormatError(
                f"record {i} for {record.token!r} has dimension {vec.shape[0]}, expected {dimension}"
            )
        if record.token not in sums:
            sums[record.token] = np.zeros(dimension)
            comps[record.token] = np.zeros(dimension)
            counts[record.token] = 0
        # Kahan step: comps carries the low-order bits lost by the add.
        y = vec - comps[record.token]
        t = sums[record.token] + y
        comps[record.token] = (t - sums[record.token]) - y
        sums[record.token] = t
        counts[record.token] += 1

    table = EmbeddingTable(snapshot_label, dimension if dimension is not None else 0)
    for token in sorted(sums):
        table.put(token, sums[token] / counts[token], counts[token])
    return table


def cosine(x: np.ndarray, y: np.ndarray) -> float:
    """Cosine similarity; zero when either vector has zero norm."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    nx = math.sqrt(float(np.dot(x, x)))
    ny = math.sqrt(float(np.dot(y, y)))
    if nx == 0.0 or ny == 0.0:
        return 0.0
    return float(np.dot(x, y)) / (nx * ny)


def _format_float(v: float) -> str:
    return format(v, ".9g")


def write_records(records: Iterable[ContextualRecord], path: str | Path) -> int:
    """Write per-occurrence records in the exchange format; returns the count.

    Tokens may repeat. The input is materialized to fill in the header's
    record count.
    """
    records = list(records)
    if records:
        label = records[0].snapshot_label
        dim = len(records[0].vector)
    else:
        label, dim = "", 0
    with open(path, "w", encoding="utf-8") as sink:
        sink.write(f"EMB\t{label}\t{dim}\t{len(records)}\n")
        for record in records:
            floats = "\t".join(_format_float(v) for v in record.vector)
            sink.write(f"{record.token}\t{floats}\n" if floats else f"{record.token}\n")
    return len(records)


def read_records(path: str | Path) -> Iterator[ContextualRecord]:
    """Stream records from an exchange file, validating as it goes."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as source:
        header = source.readline().rstrip("\n")
        parts = header.split("\t")
        if len(parts) != 4 or parts[0] != "EMB":
            raise EmbeddingFormatError(f"{path}:1: malformed header {header!r}")
        label = parts[1]
        try:
            dim = int(parts[2])
            declared = int(parts[3])
        except ValueError as exc:
            raise EmbeddingFormatError(f"{path}:1: malformed header {header!r}") from exc
        n = 0
        for lineno, line in enumerate(source, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            token = fields[0]
            if len(fields) - 1 != dim:
                raise EmbeddingFormatError(
                    f"{path}:{lineno}: expected {dim} floats, found {len(fields) - 1}"
                )
            try:
                vector = tuple(float(f) for f in fields[1:])
            except ValueError as exc:
                raise EmbeddingFormatError(f"{path}:{lineno}: bad float: {exc}") from exc
            if not all(math.isfinite(v) for v in vector):
                raise EmbeddingFormatError(f"{path}:{lineno}: non-finite value")
            n += 1
            yield ContextualRecord(token=token, snapshot_label=label, vector=vector)
        if n != declared:
            raise EmbeddingFormatError(
                f"{path}: header declares {declared} records, found {n}"
            )


def save_table(table: EmbeddingTable, path: str | Path) -> None:
    """Write an averaged table, one line per token, tokens sorted."""
    with open(path, "w", encoding="utf-8") as sink:
        sink.write(
            f"EMB\t{table.snapshot_label}\t{table.dimension}\t{len(table)}\n"
        )
        for token in sorted(table.tokens()):
            floats = "\t".join(_format_float(v) for v in table.lookup(token))
            sink.write(f"{token}\t{floats}\n" if floats else f"{token}\n")


def load_table(path: str | Path) -> EmbeddingTable:
    """Load an exchange file into an averaged table.

    Per-occurrence files (repeated tokens) are averaged on the way in, so the
    result is always the per-token mean table.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as source:
        header = source.readline().rstrip("\n")
    parts = header.split("\t")
    if len(parts) != 4 or parts[0] != "EMB":
        raise EmbeddingFormatError(f"{path}:1: malformed header {header!r}")
    label = parts[1]
    table = average(read_records(path), label)
    if len(table) == 0:
        # Preserve the declared dimension for empty tables.
        table = EmbeddingTable(label, int(parts[2]))
    return table

"""Token-likelihood oracles for template search.

Two oracle kinds share one interface: a self-contained add-alpha n-gram
model for desk-scale verification, and a client for an external scorer
speaking a newline-delimited JSON protocol over a subprocess's standard
streams.

Protocol (one JSON record per line, UTF-8):
  server hello   {"proto": 1, "name": <text>, "max_context": <int or null>}
  request        {"id": <int>, "op": "score", "prefix": [...], "candidates": [[...], ...]}
  response       {"id": <int>, "logprobs": [...]}  or  {"id": <int>, "error": <text>}
"""

from __future__ import annotations

import json
import math
import subprocess
import threading
from collections import Counter
from dataclasses import dataclass
from queue import Empty, Queue
from typing import IO, Protocol, Sequence

from .corpus import Snapshot

UNKNOWN_TOKEN = "<unk>"


class OracleProtocolError(RuntimeError):
    """Raised when the external peer violates the stream protocol."""


@dataclass(frozen=True)
class OracleInfo:
    """Capability descriptor: candidate vocabulary (if known) and context cap."""

    name: str
    vocab: frozenset[str] | None
    max_context: int | None


class LikelihoodOracle(Protocol):
    @property
    def info(self) -> OracleInfo: ...

    def logprob(
        self, prefix: Sequence[str], candidates: Sequence[Sequence[str]]
    ) -> list[float]: ...


class NGramLM:
    """Add-alpha n-gram model; unseen contexts back off to the unigram.

    Tokens outside the training vocabulary are mapped to the unknown symbol,
    both in conditioning contexts and in scored candidates.
    """

    def __init__(self, n: int, alpha: float, sentences: Sequence[Sequence[str]]):
        if n < 1:
            raise ValueError("order n must be >= 1")
        if alpha <= 0:
            raise ValueError("alpha must be > 0")
        if not sentences:
            raise ValueError("empty training corpus")
        self.n = n
        self.alpha = alpha
        vocab = {t for sentence in sentences for t in sentence}
        vocab.add(UNKNOWN_TOKEN)
        self.vocabulary = frozenset(vocab)
        # counts[k] holds k-gram counts; prefix_totals[k] the continuation
        # mass of each (k-1)-gram context, i.e. how often it has a next token.
        self._counts: dict[int, Counter[tuple[str, ...]]] = {
            k: Counter() for k in range(1, n + 1)
        }
        self._prefix_totals: dict[int, Counter[tuple[str, ...]]] = {
            k: Counter() for k in range(2, n + 1)
        }
        self._total_tokens = 0
        for sentence in sentences:
            tokens = tuple(sentence)
            self._total_tokens += len(tokens)
            for k in range(1, n + 1):
                for i in range(len(tokens) - k + 1):
                    gram = tokens[i : i + k]
                    self._counts[k][gram] += 1
                    if k >= 2:
                        self._prefix_totals[k][gram[:-1]] += 1

    @property
    def info(self) -> OracleInfo:
        return OracleInfo(
            name=f"ngram-{self.n}",
            vocab=frozenset(self.vocabulary - {UNKNOWN_TOKEN}),
            max_context=None,
        )

    def _normalize(self, token: str) -> str:
        return token if token in self.vocabulary else UNKNOWN_TOKEN

    def _token_logprob(self, token: str, context: Sequence[str]) -> float:
        token = self._normalize(token)
        v = len(self.vocabulary)
        order = min(self.n, len(context) + 1)
        if order >= 2:
            ctx = tuple(self._normalize(t) for t in context[-(order - 1) :])
            denom = self._prefix_totals[order][ctx]
            if denom > 0:
                num = self._counts[order][ctx + (token,)]
                return math.log((num + self.alpha) / (denom + self.alpha * v))
        num = self._counts[1][(token,)]
        return math.log((num + self.alpha) / (self._total_tokens + self.alpha * v))

    def logprob(
        self, prefix: Sequence[str], candidates: Sequence[Sequence[str]]
    ) -> list[float]:
        if not candidates:
            raise ValueError("candidates must be non-empty")
        out = []
        for candidate in candidates:
            context = list(prefix)
            total = 0.0
            for token in candidate:
                total += self._token_logprob(token, context)
                context.append(token)
            out.append(total)
        return out


def train_ngram(
    snapshots: Sequence[Snapshot], n: int = 3, alpha: float = 0.1
) -> NGramLM:
    """Fit the reference n-gram oracle on the union of the snapshots."""
    sentences = [s for snap in snapshots for s in snap.sentences]
    return NGramLM(n=n, alpha=alpha, sentences=sentences)


def logprob(
    oracle: LikelihoodOracle,
    prefix: Sequence[str],
    candidates: Sequence[Sequence[str]],
) -> list[float]:
    """Score candidate continuations of a prefix; one log-probability each."""
    return oracle.logprob(prefix, candidates)


class ExternalOracle:
    """Client for an external scorer speaking the stream protocol.

    Writes are serialized and responses are matched to requests by id, so
    out-of-order replies are handled; concurrent callers simply serialize.
    A timed-out request is retried once (scoring is idempotent) before the
    failure is surfaced with the offending request id.
    """

    def __init__(
        self,
        reader: IO[str],
        writer: IO[str],
        timeout: float | None = 30.0,
        _process: subprocess.Popen | None = None,
    ):
        self._writer = writer
        self._process = _process
        self._timeout = timeout
        self._lock = threading.Lock()
        self._pending: dict[int, dict] = {}
        self._next_id = 0
        self._lines_read = 0
        self._queue: Queue[tuple[int, str] | None] = Queue()
        self._reader_thread = threading.Thread(
            target=self._pump, args=(reader,), daemon=True
        )
        self._reader_thread.start()
        hello = self._read_record(expect_id=None)
        if hello.get("proto") != 1:
            raise OracleProtocolError(f"unsupported handshake: {hello!r}")
        max_context = hello.get("max_context")
        self._info = OracleInfo(
            name=str(hello.get("name", "external")),
            vocab=None,
            max_context=int(max_context) if max_context is not None else None,
        )

    @classmethod
    def from_command(
        cls, argv: Sequence[str], timeout: float | None = 30.0
    ) -> "ExternalOracle":
        proc = subprocess.Popen(
            list(argv),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
        )
        assert proc.stdin is not None and proc.stdout is not None
        return cls(proc.stdout, proc.stdin, timeout=timeout, _process=proc)

    @property
    def info(self) -> OracleInfo:
        return self._info

    def _pump(self, reader: IO[str]) -> None:
        lineno = 0
        for line in reader:
            lineno += 1
            self._queue.put((lineno, line))
        self._queue.put(None)

    def _read_record(self, expect_id: int | None) -> dict:
        """Pop records until one matches; stash responses for other ids."""
        if expect_id is not None and expect_id in self._pending:
            return self._pending.pop(expect_id)
        while True:
            try:
                item = self._queue.get(timeout=self._timeout)
            except Empty:
                raise TimeoutError(
                    f"timed out waiting for oracle response (request id {expect_id})"
                )
            if item is None:
                raise OracleProtocolError(
                    f"oracle peer exited while awaiting request id {expect_id}"
                )
            lineno, line = item
            self._lines_read = lineno
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise OracleProtocolError(
                    f"malformed response at line {lineno} (request id {expect_id}): {exc}"
                ) from exc
            if not isinstance(record, dict):
                raise OracleProtocolError(
                    f"malformed response at line {lineno} (request id {expect_id}): not an object"
                )
            if expect_id is None:
                return record
            got = record.get("id")
            if got == expect_id:
                return record
            if isinstance(got, int):
                self._pending[got] = record
                continue
            raise OracleProtocolError(
                f"response without usable id at line {lineno} (request id {expect_id})"
            )

    def _roundtrip(self, request: dict) -> dict:
        self._writer.write(json.dumps(request, ensure_ascii=False) + "\n")
        self._writer.flush()
        return self._read_record(expect_id=request["id"])

    def logprob(
        self, prefix: Sequence[str], candidates: Sequence[Sequence[str]]
    ) -> list[float]:
        if not candidates:
            raise ValueError("candidates must be non-empty")
        if self._info.max_context is not None and len(prefix) > self._info.max_context:
            raise OracleProtocolError(
                f"prefix of {len(prefix)} tokens exceeds oracle max_context "
                f"{self._info.max_context}"
            )
        with self._lock:
            request_id = self._next_id
            self._next_id += 1
            request = {
                "id": request_id,
                "op": "score",
                "prefix": list(prefix),
                "candidates": [list(c) for c in candidates],
            }
            try:
                record = self._roundtrip(request)
            except TimeoutError:
                record = self._roundtrip(request)
        if "error" in record:
            raise OracleProtocolError(f"request id {request_id} failed: {record['error']}")
        values = record.get("logprobs")
        if not isinstance(values, list) or len(values) != len(candidates):
            raise OracleProtocolError(
                f"request id {request_id}: expected {len(candidates)} logprobs, "
                f"got {values!r}"
            )
        out = []
        for v in values:
            if not isinstance(v, (int, float)) or not math.isfinite(v) or v > 0:
                raise OracleProtocolError(
                    f"request id {request_id}: invalid log-probability {v!r}"
                )
            out.append(float(v))
        return out

    def close(self) -> None:
        try:
            self._writer.close()
        except OSError:
            pass
        if self._process is not None:
            self._process.wait(timeout=10)

    def __enter__(self) -> "ExternalOracle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def external_oracle(
    connection: Sequence[str] | tuple[IO[str], IO[str]],
    timeout: float | None = 30.0,
) -> ExternalOracle:
    """Open an oracle client over a command line or an (reader, writer) pair."""
    if isinstance(connection, tuple) and len(connection) == 2 and hasattr(connection[0], "read"):
        reader, writer = connection
        return ExternalOracle(reader, writer, timeout=timeout)
    return ExternalOracle.from_command(list(connection), timeout=timeout)

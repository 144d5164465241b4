"""Likelihood oracle server speaking newline-delimited JSON over stdio.

Handshake first, then one response per request, in request order:

  {"proto": 1, "name": <model name>, "max_context": <int or null>}
  {"id": <int>, "op": "score", "prefix": [...], "candidates": [[...], ...]}
  {"id": <int>, "logprobs": [...]}  |  {"id": <int>, "error": <text>}

Scoring is teacher-forced (no sampling): the prefix feeds the encoder and a
candidate's log-probability is the sum of its target-token log-probabilities
under the decoder, so repeated requests are bit-identical.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import IO, Sequence

import torch

from .config import BridgeConfig
from .models import load_seq2seq


class Seq2SeqScorer:
    def __init__(self, config: BridgeConfig):
        self.tokenizer, self.model = load_seq2seq(config.model, config.device)
        self.device = config.device
        self.name = Path(config.model).name

    def _encode_prefix(self, prefix: Sequence[str]) -> torch.Tensor:
        ids = self.tokenizer(
            " ".join(prefix), add_special_tokens=False
        ).input_ids
        if not ids:
            ids = [self.tokenizer.pad_token_id]
        return torch.tensor([ids], device=self.device)

    def score(
        self, prefix: Sequence[str], candidates: Sequence[Sequence[str]]
    ) -> list[float]:
        encoder_ids = self._encode_prefix(prefix)
        values = []
        for candidate in candidates:
            if not candidate:
                values.append(0.0)
                continue
            target = self.tokenizer(
                " ".join(candidate), add_special_tokens=False
            ).input_ids
            if not target:
                values.append(0.0)
                continue
            labels = torch.tensor([target], device=self.device)
            with torch.no_grad():
                logits = self.model(input_ids=encoder_ids, labels=labels).logits
            logprobs = torch.log_softmax(logits[0], dim=-1)
            total = logprobs[range(len(target)), target].sum()
            values.append(min(float(total), 0.0))
        return values


def _emit(outstream: IO[str], record: dict) -> None:
    outstream.write(json.dumps(record, ensure_ascii=False) + "\n")
    outstream.flush()


def serve(
    config: BridgeConfig,
    instream: IO[str] | None = None,
    outstream: IO[str] | None = None,
    scorer: Seq2SeqScorer | None = None,
) -> None:
    """Run the serve loop until the input stream closes."""
    instream = instream if instream is not None else sys.stdin
    outstream = outstream if outstream is not None else sys.stdout
    if scorer is None:
        scorer = Seq2SeqScorer(config)
    _emit(outstream, {"proto": 1, "name": scorer.name, "max_context": None})
    for line in instream:
        if not line.strip():
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            _emit(outstream, {"id": None, "error": f"malformed request: {exc}"})
            continue
        request_id = request.get("id") if isinstance(request, dict) else None
        if not isinstance(request_id, int):
            _emit(outstream, {"id": None, "error": "request lacks an integer id"})
            continue
        if request.get("op") != "score":
            _emit(outstream, {"id": request_id, "error": f"unknown op {request.get('op')!r}"})
            continue
        prefix = request.get("prefix")
        candidates = request.get("candidates")
        if not isinstance(prefix, list) or not all(isinstance(t, str) for t in prefix):
            _emit(outstream, {"id": request_id, "error": "prefix must be a list of strings"})
            continue
        if (
            not isinstance(candidates, list)
            or not candidates
            or not all(
                isinstance(c, list) and all(isinstance(t, str) for t in c)
                for c in candidates
            )
        ):
            _emit(
                outstream,
                {"id": request_id, "error": "candidates must be a non-empty list of token lists"},
            )
            continue
        values = scorer.score(prefix, candidates)
        _emit(outstream, {"id": request_id, "logprobs": values})

"""Prompt expansion and masked-instance emission for MLM fine-tuning.

Prompts are templates filled with scored tuples; each prompt then yields
training instances that mask one whitespace token at a uniformly chosen
position. The training file is newline-delimited JSON consumed by the
neural fine-tuner.
"""

from __future__ import annotations

import json
import random
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .templates import Template, TemplateError, fill
from .tuples import ScoredTuple, TupleSet


@dataclass(frozen=True)
class Prompt:
    text: str
    w: str
    u: str
    v: str
    template_index: int
    t1_label: str
    t2_label: str


@dataclass(frozen=True)
class MaskedInstance:
    """A prompt with exactly one masked whitespace-token position."""

    tokens: tuple[str, ...]
    masked_position: int
    original_token: str

    def __post_init__(self):
        if not (0 <= self.masked_position < len(self.tokens)):
            raise ValueError("masked_position out of range")
        if self.tokens[self.masked_position] != self.original_token:
            raise ValueError("original_token does not match the masked position")


_REQUIRED_SLOTS = {"U", "V", "T1", "T2"}


def generate_prompts(
    tuples: TupleSet | Sequence[ScoredTuple],
    templates: Sequence[Template],
    t1_label: str,
    t2_label: str,
) -> list[Prompt]:
    """Fill every template with every tuple, in (tuple-rank, template) order.

    Prompts with identical text keep only their first occurrence. Every
    template must carry the U, V, T1, and T2 slots so the produced text
    names both anchors and both timestamps.
    """
    for i, template in enumerate(templates):
        missing = _REQUIRED_SLOTS - set(template.slot_kinds())
        if missing:
            raise TemplateError(
                f"template {i} lacks required slot(s) {sorted(missing)}"
            )
    seen: set[str] = set()
    prompts: list[Prompt] = []
    for t in tuples:
        for i, template in enumerate(templates):
            text = fill(template, t, t1_label, t2_label)
            if text in seen:
                continue
            seen.add(text)
            prompts.append(
                Prompt(
                    text=text,
                    w=t.w,
                    u=t.u,
                    v=t.v,
                    template_index=i,
                    t1_label=t1_label,
                    t2_label=t2_label,
                )
            )
    return prompts


def mask_instances(
    prompt: Prompt, masks_per_prompt: int, rng: random.Random
) -> list[MaskedInstance]:
    """Draw ``masks_per_prompt`` distinct masked positions for one prompt."""
    tokens = tuple(prompt.text.split())
    n = len(tokens)
    if masks_per_prompt >= n:
        if masks_per_prompt > n:
            warnings.warn(
                f"prompt has {n} tokens but {masks_per_prompt} masks requested; "
                "masking every position once"
            )
        positions = list(range(n))
    else:
        positions = rng.sample(range(n), masks_per_prompt)
    return [
        MaskedInstance(tokens=tokens, masked_position=p, original_token=tokens[p])
        for p in positions
    ]


def emit_training_file(
    prompts: Sequence[Prompt],
    path: str | Path,
    masks_per_prompt: int = 1,
    seed: int = 123,
) -> list[MaskedInstance]:
    """Write masked instances as NDJSON records, one per mask draw.

    Record fields: ``text`` (the unmasked prompt), ``mask_index`` (the
    whitespace-token position to mask), ``label`` (the token at it).
    Identical inputs and seed produce a byte-identical file.
    """
    if masks_per_prompt < 1:
        raise ValueError("masks_per_prompt must be >= 1")
    rng = random.Random(seed)
    instances: list[MaskedInstance] = []
    with open(path, "w", encoding="utf-8") as sink:
        for prompt in prompts:
            for instance in mask_instances(prompt, masks_per_prompt, rng):
                instances.append(instance)
                record = {
                    "text": prompt.text,
                    "mask_index": instance.masked_position,
                    "label": instance.original_token,
                }
                sink.write(json.dumps(record, ensure_ascii=False) + "\n")
    return instances


def load_training_file(path: str | Path) -> list[MaskedInstance]:
    """Read a training file back into masked instances (validating records)."""
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        record = json.loads(line)
        tokens = tuple(record["text"].split())
        out.append(
            MaskedInstance(
                tokens=tokens,
                masked_position=int(record["mask_index"]),
                original_token=str(record["label"]),
            )
        )
    return out

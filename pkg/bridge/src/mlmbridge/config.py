"""Bridge configuration with the published fine-tuning defaults."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path


@dataclass
class BridgeConfig:
    model: str = "bert-base-uncased"
    device: str = "cpu"
    learning_rate: float = 3e-8
    batch_size: int = 4
    epochs: int = 20
    weight_decay: float = 0.01
    seed: int = 123
    occurrence_cap: int = 1000
    # Optional schedule: linear warm-up over the first fraction of steps,
    # optionally followed by linear decay to zero.
    warmup_fraction: float = 0.0
    linear_decay: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.occurrence_cap < 1:
            raise ValueError("occurrence_cap must be >= 1")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ValueError("warmup_fraction must be in [0, 1)")

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "BridgeConfig":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))

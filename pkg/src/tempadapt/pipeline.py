"""End-to-end pipeline: ingest, stats, tuples, templates, prompts, training file.

Every run writes its artifacts plus a manifest of content digests; expensive
stages are resumable when their inputs and configuration are unchanged.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from . import corpus, embeddings, oracle, prompts, stats, templates, tuples

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid or inconsistent pipeline configuration."""


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage!r} failed: {message}")
        self.stage = stage


VALID_METHODS = ("freq", "div", "cont")
VALID_TEMPLATE_SOURCES = ("manual", "auto")

#: The tuple-count grid commonly swept when tuning; any positive k is accepted.
K_PRESETS = (500, 1000, 2000, 5000, 10000)


@dataclass
class PipelineConfig:
    c1_path: str = ""
    c2_path: str = ""
    t1_label: str = "T1"
    t2_label: str = "T2"
    input_format: str = "lines"
    output_dir: str = "out"

    method: str = "freq"
    template_source: str = "manual"
    template_file: str | None = None

    k: int = 500
    m: int = tuples.DEFAULT_ANCHOR_CAPACITY
    min_anchor_freq: int = tuples.DEFAULT_MIN_ANCHOR_FREQ
    min_words: int = 10
    div_candidates_factor: int = 5

    train_fraction: float = 0.7
    dev_fraction: float = 0.1
    test_fraction: float = 0.2
    split_seed: int = 123
    mask_seed: int = 123
    masks_per_prompt: int = 1

    beam_width: int = 100
    max_slot_len: int = 5
    top_n_templates: int = 10
    search_tuple_cap: int | None = 10
    slot_vocab_size: int = 200

    emb1_path: str | None = None
    emb2_path: str | None = None

    oracle_cmd: list[str] | None = None
    ngram_order: int = 3
    ngram_alpha: float = 0.1

    @classmethod
    def from_file(cls, path: str | Path, overrides: dict | None = None) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} is not a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
        if overrides:
            data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def validate(self) -> None:
        if self.method not in VALID_METHODS:
            raise ConfigError(f"method must be one of {VALID_METHODS}, got {self.method!r}")
        if self.template_source not in VALID_TEMPLATE_SOURCES:
            raise ConfigError(
                f"template_source must be one of {VALID_TEMPLATE_SOURCES}, "
                f"got {self.template_source!r}"
            )
        if self.k < 1:
            raise ConfigError("k must be a positive integer")
        if self.m < 0:
            raise ConfigError("m must be >= 0")
        for name in ("c1_path", "c2_path"):
            value = getattr(self, name)
            if not value:
                raise ConfigError(f"{name} is required")
            if not Path(value).exists():
                raise ConfigError(f"{name}: no such file: {value}")
        if self.template_file is not None and not Path(self.template_file).exists():
            raise ConfigError(f"template_file: no such file: {self.template_file}")
        if self.method == "cont":
            if not self.emb1_path:
                raise ConfigError("missing embedding table for snapshot T1")
            if not self.emb2_path:
                raise ConfigError("missing embedding table for snapshot T2")
            for path in (self.emb1_path, self.emb2_path):
                if not Path(path).exists():
                    raise ConfigError(f"embedding table not found: {path}")
        corpus.SplitSpec(
            self.train_fraction, self.dev_fraction, self.test_fraction, self.split_seed
        )

    def split_spec(self) -> corpus.SplitSpec:
        return corpus.SplitSpec(
            self.train_fraction, self.dev_fraction, self.test_fraction, self.split_seed
        )

    def pivot_budget(self) -> int:
        per_pivot = max(1, self.m * self.m)
        return max(1, math.ceil(self.k / per_pivot))

    def content_hash(self) -> str:
        """Digest of everything that determines artifact content.

        Output location is excluded so runs into different directories
        compare equal; input files enter via their content digests.
        """
        data = asdict(self)
        data.pop("output_dir")
        for name in ("c1_path", "c2_path", "template_file", "emb1_path", "emb2_path"):
            value = data.pop(name)
            data[name + "_digest"] = sha256_file(value) if value else None
        return _digest_obj(data)


@dataclass(frozen=True)
class ResultsRow:
    dataset: str
    model: str
    method: str
    template: str
    k: int
    perplexity: float


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as source:
        for block in iter(lambda: source.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def _digest_obj(obj) -> str:
    return hashlib.sha256(
        json.dumps(obj, sort_keys=True, ensure_ascii=False).encode("utf-8")
    ).hexdigest()


ARTIFACTS = ("corpus.json", "tuples.tsv", "templates.txt", "prompts.jsonl", "train.jsonl")


class _Cache:
    """Stage keys recorded beside the artifacts, enabling resumption."""

    def __init__(self, outdir: Path):
        self.path = outdir / "stages.json"
        self.data: dict[str, str] = {}
        if self.path.exists():
            try:
                self.data = json.loads(self.path.read_text(encoding="utf-8"))
            except json.JSONDecodeError:
                self.data = {}

    def fresh(self, stage: str, key: str, artifact: Path) -> bool:
        return self.data.get(stage) == key and artifact.exists()

    def record(self, stage: str, key: str) -> None:
        self.data[stage] = key
        self.path.write_text(
            json.dumps(self.data, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )


@dataclass
class _Workspace:
    """In-memory products shared between stages."""

    config: PipelineConfig
    outdir: Path
    train1: corpus.Snapshot | None = None
    train2: corpus.Snapshot | None = None
    counts1: tuple[stats.FrequencyTable, stats.CoocTable] | None = None
    counts2: tuple[stats.FrequencyTable, stats.CoocTable] | None = None
    tuple_set: tuples.TupleSet | None = None
    template_list: list[templates.Template] = field(default_factory=list)
    prompt_list: list[prompts.Prompt] = field(default_factory=list)


def _stage_ingest(ws: _Workspace) -> None:
    cfg = ws.config
    summary = {}
    for side, path, label in (("c1", cfg.c1_path, cfg.t1_label), ("c2", cfg.c2_path, cfg.t2_label)):
        snap = corpus.load_snapshot(path, cfg.input_format, label)
        snap = corpus.preprocess(snap, cfg.min_words)
        train, dev, test = corpus.split(snap, cfg.split_spec())
        if side == "c1":
            ws.train1 = train
        else:
            ws.train2 = train
        # auxiliary sentence exports for the neural bridge (not manifest
        # artifacts): train for embedding contexts, test for evaluation
        suffix = "t1" if side == "c1" else "t2"
        for part, tag in ((train, "train"), (test, "test")):
            with open(ws.outdir / f"{tag}_{suffix}.txt", "w", encoding="utf-8") as sink:
                for sentence in part.sentences:
                    sink.write(" ".join(sentence) + "\n")
        summary[side] = {
            "label": label,
            "documents": snap.n_documents,
            "train_documents": train.n_documents,
            "dev_documents": dev.n_documents,
            "test_documents": test.n_documents,
            "train_sentences": train.n_sentences,
            "vocab": len(snap.vocab),
        }
    summary["split_seed"] = cfg.split_seed
    summary["fractions"] = [cfg.train_fraction, cfg.dev_fraction, cfg.test_fraction]
    (ws.outdir / "corpus.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _stage_stats(ws: _Workspace) -> None:
    assert ws.train1 is not None and ws.train2 is not None
    ws.counts1 = stats.count(ws.train1)
    ws.counts2 = stats.count(ws.train2)


def dump_stats(ws_or_config, outdir: str | Path | None = None):
    """Write the four frequency/co-occurrence TSVs for the train splits."""
    if isinstance(ws_or_config, PipelineConfig):
        ws = _Workspace(ws_or_config, Path(outdir or ws_or_config.output_dir))
        ws.outdir.mkdir(parents=True, exist_ok=True)
        _stage_ingest(ws)
        _stage_stats(ws)
    else:
        ws = ws_or_config
    assert ws.counts1 is not None and ws.counts2 is not None
    stats.save_frequencies(ws.counts1[0], ws.outdir / "freq_t1.tsv")
    stats.save_frequencies(ws.counts2[0], ws.outdir / "freq_t2.tsv")
    stats.save_cooccurrences(ws.counts1[1], ws.outdir / "cooc_t1.tsv")
    stats.save_cooccurrences(ws.counts2[1], ws.outdir / "cooc_t2.tsv")
    return ws


def _mine_anchor_sets(
    pivots: Sequence[str], ws: _Workspace
) -> dict[str, tuples.AnchorSet]:
    cfg = ws.config
    assert ws.counts1 is not None and ws.counts2 is not None
    return {
        w: tuples.build_anchor_set(
            w, ws.counts1, ws.counts2, m=cfg.m, min_anchor_freq=cfg.min_anchor_freq
        )
        for w in pivots
    }


def _stage_tuples(ws: _Workspace) -> None:
    cfg = ws.config
    assert ws.counts1 is not None and ws.counts2 is not None
    freq1, _ = ws.counts1
    freq2, _ = ws.counts2
    budget = cfg.pivot_budget()

    if cfg.method == "freq":
        pivots = tuples.select_pivots(freq1, freq2, top_k=budget)
        anchor_sets = _mine_anchor_sets(pivots, ws)
        ws.tuple_set = tuples.build_freq_tuples(pivots, anchor_sets, cfg.k, freq1, freq2)
    elif cfg.method == "div":
        pivots = tuples.select_pivots(
            freq1, freq2, top_k=cfg.div_candidates_factor * budget
        )
        anchor_sets = _mine_anchor_sets(pivots, ws)
        ws.tuple_set = tuples.build_div_tuples(pivots, anchor_sets, cfg.k, freq1, freq2)
    else:  # cont
        if not cfg.emb1_path:
            raise ConfigError("missing embedding table for snapshot T1")
        if not cfg.emb2_path:
            raise ConfigError("missing embedding table for snapshot T2")
        emb1 = embeddings.load_table(cfg.emb1_path)
        emb2 = embeddings.load_table(cfg.emb2_path)
        pivots = tuples.select_pivots(freq1, freq2, top_k=budget)
        anchor_sets = _mine_anchor_sets(pivots, ws)
        pool = tuples.build_freq_tuples(
            pivots, anchor_sets, max(cfg.k, budget * max(1, cfg.m) ** 2), freq1, freq2
        )
        ws.tuple_set = tuples.build_cont_tuples(pool, emb1, emb2, cfg.k)
    tuples.save_tuples(ws.tuple_set, ws.outdir / "tuples.tsv")


def _make_oracle(ws: _Workspace) -> oracle.LikelihoodOracle:
    cfg = ws.config
    if cfg.oracle_cmd:
        return oracle.external_oracle(cfg.oracle_cmd)
    assert ws.train1 is not None and ws.train2 is not None
    return oracle.train_ngram(
        [ws.train1, ws.train2], n=cfg.ngram_order, alpha=cfg.ngram_alpha
    )


def _slot_vocab(ws: _Workspace) -> list[str]:
    """Slot-candidate tokens: the most frequent train-split words, so slot
    decoding stays tractable on corpora with long rare-word tails."""
    cfg = ws.config
    assert ws.counts1 is not None and ws.counts2 is not None
    freq1, _ = ws.counts1
    freq2, _ = ws.counts2
    combined: dict[str, int] = {}
    for table in (freq1, freq2):
        for token in table.tokens():
            combined[token] = combined.get(token, 0) + table.get(token)
    ranked = sorted(combined.items(), key=lambda item: (-item[1], item[0]))
    return [token for token, _ in ranked[: cfg.slot_vocab_size]]


def _stage_templates(ws: _Workspace) -> None:
    cfg = ws.config
    if cfg.template_source == "manual":
        if cfg.template_file:
            ws.template_list = templates.load_templates(cfg.template_file)
        else:
            ws.template_list = templates.default_templates()
    else:
        assert ws.tuple_set is not None
        search_tuples = list(ws.tuple_set)
        if cfg.search_tuple_cap is not None:
            search_tuples = search_tuples[: cfg.search_tuple_cap]
        if not search_tuples:
            raise StageError("templates", "no tuples available for template search")
        assert ws.train1 is not None and ws.train2 is not None
        pairs = templates.select_context_pairs(search_tuples, ws.train1, ws.train2)
        lm = _make_oracle(ws)
        ws.template_list = templates.search_templates(
            search_tuples,
            lm,
            pairs,
            cfg.t1_label,
            cfg.t2_label,
            beam_width=cfg.beam_width,
            max_slot_len=cfg.max_slot_len,
            top_n=cfg.top_n_templates,
            vocab=_slot_vocab(ws),
        )
    if not ws.template_list:
        raise StageError("templates", "no templates produced")
    templates.save_templates(ws.template_list, ws.outdir / "templates.txt")


def _stage_prompts(ws: _Workspace) -> None:
    cfg = ws.config
    assert ws.tuple_set is not None
    ws.prompt_list = prompts.generate_prompts(
        ws.tuple_set, ws.template_list, cfg.t1_label, cfg.t2_label
    )
    with open(ws.outdir / "prompts.jsonl", "w", encoding="utf-8") as sink:
        for p in ws.prompt_list:
            record = {
                "text": p.text,
                "w": p.w,
                "u": p.u,
                "v": p.v,
                "template_index": p.template_index,
            }
            sink.write(json.dumps(record, ensure_ascii=False) + "\n")


def _stage_train(ws: _Workspace) -> None:
    cfg = ws.config
    prompts.emit_training_file(
        ws.prompt_list,
        ws.outdir / "train.jsonl",
        masks_per_prompt=cfg.masks_per_prompt,
        seed=cfg.mask_seed,
    )


_STAGES = (
    ("ingest", _stage_ingest, "corpus.json"),
    ("stats", _stage_stats, None),
    ("tuples", _stage_tuples, "tuples.tsv"),
    ("templates", _stage_templates, "templates.txt"),
    ("prompts", _stage_prompts, "prompts.jsonl"),
    ("emit-train", _stage_train, "train.jsonl"),
)

# Config fields each stage's output actually depends on; caching keys hash the
# subset plus the content digests of the referenced input files.
_CORPUS_FIELDS = (
    "c1_path",
    "c2_path",
    "t1_label",
    "t2_label",
    "input_format",
    "min_words",
    "train_fraction",
    "dev_fraction",
    "test_fraction",
    "split_seed",
)
_STAGE_FIELDS = {
    "ingest": _CORPUS_FIELDS,
    "stats": _CORPUS_FIELDS,
    "tuples": _CORPUS_FIELDS
    + ("method", "k", "m", "min_anchor_freq", "div_candidates_factor", "emb1_path", "emb2_path"),
    "templates": _CORPUS_FIELDS
    + (
        "method",
        "k",
        "m",
        "min_anchor_freq",
        "div_candidates_factor",
        "emb1_path",
        "emb2_path",
        "template_source",
        "template_file",
        "beam_width",
        "max_slot_len",
        "top_n_templates",
        "search_tuple_cap",
        "slot_vocab_size",
        "oracle_cmd",
        "ngram_order",
        "ngram_alpha",
    ),
}
_STAGE_FIELDS["prompts"] = _STAGE_FIELDS["templates"]
_STAGE_FIELDS["emit-train"] = _STAGE_FIELDS["templates"] + ("masks_per_prompt", "mask_seed")

_FILE_FIELDS = ("c1_path", "c2_path", "template_file", "emb1_path", "emb2_path")


def _stage_key(name: str, config: PipelineConfig) -> str:
    data = {}
    for field_name in _STAGE_FIELDS[name]:
        value = getattr(config, field_name)
        if field_name in _FILE_FIELDS:
            value = sha256_file(value) if value else None
        data[field_name] = value
    return _digest_obj({"stage": name, "inputs": data})


def run_pipeline(config: PipelineConfig, until: str | None = None) -> dict:
    """Run the pipeline (optionally only up to stage ``until``).

    Returns the manifest dict; the full run also writes ``manifest.json``.
    Artifact digests depend only on inputs, configuration, and seeds, so a
    rerun with the same inputs is byte-identical.
    """
    config.validate()
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    ws = _Workspace(config, outdir)
    cache = _Cache(outdir)
    config_hash = config.content_hash()

    # Expensive, file-backed stages may be reloaded instead of recomputed.
    reloaders = {
        "tuples": lambda: setattr(
            ws, "tuple_set", tuples.load_tuples(outdir / "tuples.tsv", k=config.k)
        ),
        "templates": lambda: setattr(
            ws, "template_list", templates.load_templates(outdir / "templates.txt")
        ),
    }

    for name, fn, artifact in _STAGES:
        key = _stage_key(name, config)
        if artifact is not None and name in reloaders and cache.fresh(name, key, outdir / artifact):
            logger.info("stage %s: reusing cached %s", name, artifact)
            reloaders[name]()
        else:
            try:
                fn(ws)
            except StageError:
                raise
            except Exception as exc:
                raise StageError(name, str(exc)) from exc
            if artifact is not None:
                cache.record(name, key)
        if until is not None and name == until:
            break

    manifest = {
        "config_hash": config_hash,
        "seeds": {"split": config.split_seed, "mask": config.mask_seed},
        "artifacts": [
            {
                "name": art,
                "path": art,
                "sha256": sha256_file(outdir / art),
                "bytes": (outdir / art).stat().st_size,
            }
            for art in ARTIFACTS
            if (outdir / art).exists()
        ],
    }
    if until is None:
        (outdir / "manifest.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    return manifest


# --- reporting -----------------------------------------------------------


def load_results(path: str | Path) -> list[ResultsRow]:
    """Parse a results TSV; duplicate (dataset, model, method, template, k)
    keys and non-positive perplexities are rejected."""
    rows: list[ResultsRow] = []
    seen: dict[tuple, int] = {}
    collisions: list[str] = []
    with open(path, "r", encoding="utf-8") as source:
        for lineno, line in enumerate(source, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("dataset\t"):
                continue
            fields = line.split("\t")
            if len(fields) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 columns, found {len(fields)}")
            dataset, model, method, template, k, ppl = fields
            row = ResultsRow(dataset, model, method, template, int(k), float(ppl))
            if row.perplexity <= 0:
                raise ValueError(f"{path}:{lineno}: perplexity must be positive")
            key = (dataset, model, method, template, row.k)
            if key in seen:
                collisions.append(f"line {lineno} duplicates line {seen[key]}: {key}")
            seen[key] = lineno
            rows.append(row)
    if collisions:
        raise ValueError("duplicate result rows: " + "; ".join(collisions))
    if not rows:
        raise ValueError(f"no result rows in {path}")
    return rows


def render_report(results_path: str | Path, out: str | Path) -> Path:
    """Plot perplexity against k, one series per (method, template).

    Writes a vector chart at ``out`` plus a pivot TSV next to it; returns the
    chart path.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = load_results(results_path)
    out = Path(out)

    groups: dict[tuple[str, str], list[ResultsRow]] = {}
    for row in rows:
        groups.setdefault((row.dataset, row.model), []).append(row)

    fig, axes = plt.subplots(
        1, len(groups), figsize=(6 * len(groups), 4.5), squeeze=False
    )
    for ax, ((dataset, model), group) in zip(axes[0], sorted(groups.items())):
        series: dict[tuple[str, str], list[ResultsRow]] = {}
        for row in group:
            series.setdefault((row.method, row.template), []).append(row)
        for (method, template), points in sorted(series.items()):
            points.sort(key=lambda r: r.k)
            ax.plot(
                [p.k for p in points],
                [p.perplexity for p in points],
                marker="o",
                label=f"{method}+{template}",
            )
        ax.set_xlabel("number of tuples (k)")
        ax.set_ylabel("masked LM perplexity")
        ax.set_title(f"{dataset} / {model}")
        ax.legend()
    fig.tight_layout()
    fig.savefig(out, metadata={"Date": None} if out.suffix == ".svg" else None)
    plt.close(fig)

    pivot_path = out.with_suffix(".tsv")
    ks = sorted({r.k for r in rows})
    columns = sorted({(r.dataset, r.model, r.method, r.template) for r in rows})
    lookup = {(r.dataset, r.model, r.method, r.template, r.k): r.perplexity for r in rows}
    with open(pivot_path, "w", encoding="utf-8") as sink:
        header = ["k"] + ["/".join(c) for c in columns]
        sink.write("\t".join(header) + "\n")
        for k in ks:
            cells = [str(k)]
            for c in columns:
                value = lookup.get((*c, k))
                cells.append("" if value is None else format(value, ".6g"))
            sink.write("\t".join(cells) + "\n")
    return out

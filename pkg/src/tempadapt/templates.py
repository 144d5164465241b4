"""Templates: literal tokens with typed slots, filling, and beam induction.

A template is a sequence of literal chunks and slots (W, U, V, T1, T2).
Manual templates are parsed from placeholder text; automatic ones are
induced by beam search that decodes the four literal runs between the
anchor positions, maximizing the log-likelihood summed over every tuple
the template must cover.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import Snapshot
from .oracle import LikelihoodOracle
from .tuples import ScoredTuple, TupleSet

SLOT_KINDS = ("W", "U", "V", "T1", "T2")

_PLACEHOLDER = re.compile(r"[<⟨]\s*(w|u|v|T1|T2|[^<>⟨⟩]{1,12}?)\s*[>⟩]")

TupleKey = tuple[str, str, str]
ContextPair = tuple[tuple[str, ...], tuple[str, ...]]


class TemplateError(ValueError):
    """Raised for malformed templates or unresolvable slots."""


@dataclass(frozen=True)
class Literal:
    """A whitespace-delimited literal chunk, surface form preserved."""

    text: str


@dataclass(frozen=True)
class Slot:
    """A typed slot; ``prefix``/``suffix`` carry punctuation glued to the
    placeholder in the source text (e.g. a trailing comma)."""

    kind: str
    prefix: str = ""
    suffix: str = ""


@dataclass(frozen=True)
class Template:
    elements: tuple[Literal | Slot, ...]
    origin: str = "manual"
    loglik: float | None = field(default=None, compare=False)

    def slot_kinds(self) -> tuple[str, ...]:
        return tuple(e.kind for e in self.elements if isinstance(e, Slot))

    def placeholder_string(self) -> str:
        parts = []
        for e in self.elements:
            if isinstance(e, Slot):
                name = e.kind.lower() if e.kind in ("W", "U", "V") else e.kind
                parts.append(f"{e.prefix}<{name}>{e.suffix}")
            else:
                parts.append(e.text)
        return " ".join(parts)

    def __post_init__(self):
        kinds = self.slot_kinds()
        for kind in kinds:
            if kind not in SLOT_KINDS:
                raise TemplateError(f"unknown slot kind {kind!r}")
        dupes = {k for k in kinds if kinds.count(k) > 1}
        if dupes:
            raise TemplateError(f"duplicate slot kind(s): {sorted(dupes)}")
        if self.origin == "auto" and tuple(kinds) != ("U", "T1", "V", "T2"):
            raise TemplateError(
                f"auto template must carry slots (U, T1, V, T2), got {kinds}"
            )


def parse_template(text: str, origin: str = "manual") -> Template:
    """Parse placeholder text (``<u>``/``⟨u⟩`` style) into a template.

    Literal chunks keep their surface casing and punctuation; punctuation
    glued to a placeholder (``<T1>,``) stays attached to that slot.
    """
    elements: list[Literal | Slot] = []
    for chunk in text.split():
        matches = list(_PLACEHOLDER.finditer(chunk))
        if not matches:
            elements.append(Literal(chunk))
            continue
        for i, match in enumerate(matches):
            name = match.group(1)
            kind = {"w": "W", "u": "U", "v": "V", "T1": "T1", "T2": "T2"}.get(name)
            if kind is None:
                raise TemplateError(f"unknown placeholder name {name!r} in {chunk!r}")
            prefix = chunk[: match.start()] if i == 0 else ""
            end = matches[i + 1].start() if i + 1 < len(matches) else len(chunk)
            suffix = chunk[match.end() : end]
            elements.append(Slot(kind=kind, prefix=prefix, suffix=suffix))
    template = Template(elements=tuple(elements), origin=origin)
    if not template.slot_kinds():
        warnings.warn("template has no placeholders; it fills to a constant string")
    return template


def fill(
    t: Template, tuple_: ScoredTuple, t1_label: str, t2_label: str
) -> str:
    """Substitute slot values; elements join with single spaces."""
    values = {
        "W": tuple_.w,
        "U": tuple_.u,
        "V": tuple_.v,
        "T1": t1_label,
        "T2": t2_label,
    }
    parts = []
    for e in t.elements:
        if isinstance(e, Slot):
            value = values.get(e.kind)
            if not value:
                raise TemplateError(f"unresolvable slot {e.kind}")
            parts.append(f"{e.prefix}{value}{e.suffix}")
        else:
            parts.append(e.text)
    return " ".join(parts)


def save_templates(templates: Sequence[Template], path: str | Path) -> None:
    """One placeholder line per template; auto templates append the loglik."""
    with open(path, "w", encoding="utf-8") as sink:
        for t in templates:
            line = t.placeholder_string()
            if t.loglik is not None:
                line += f"\t{t.loglik!r}"
            sink.write(line + "\n")


def load_templates(path: str | Path) -> list[Template]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        text, tab, loglik = line.partition("\t")
        if tab:
            parsed = parse_template(text, origin="auto")
            out.append(Template(parsed.elements, origin="auto", loglik=float(loglik)))
        else:
            out.append(parse_template(text))
    return out


def select_context_pairs(
    tuples: TupleSet | Sequence[ScoredTuple],
    snapshot1: Snapshot,
    snapshot2: Snapshot,
) -> dict[TupleKey, ContextPair]:
    """Pick the framing sentences for each tuple.

    The anchor-bearing sentence is the shortest one containing the anchor in
    its snapshot, ties broken lexicographically on the token sequence.
    """
    sentences1 = sorted(snapshot1.sentences, key=lambda s: (len(s), s))
    sentences2 = sorted(snapshot2.sentences, key=lambda s: (len(s), s))

    def shortest_with(token: str, ranked: list, label: str) -> tuple[str, ...]:
        for sentence in ranked:
            if token in sentence:
                return sentence
        raise TemplateError(f"no sentence in snapshot {label!r} contains {token!r}")

    pairs: dict[TupleKey, ContextPair] = {}
    for t in tuples:
        key = (t.w, t.u, t.v)
        if key in pairs:
            continue
        pairs[key] = (
            shortest_with(t.u, sentences1, snapshot1.timestamp_label),
            shortest_with(t.v, sentences2, snapshot2.timestamp_label),
        )
    return pairs


# --- automatic template induction ---------------------------------------


@dataclass(frozen=True)
class SearchState:
    """A partially decoded template: the four literal runs and the running
    coverage-summed log-likelihood."""

    slots: tuple[tuple[str, ...], tuple[str, ...], tuple[str, ...], tuple[str, ...]]
    open_slot: int  # 0..3 while decoding, 4 when complete
    loglik: float

    def sort_key(self):
        return (-self.loglik, self.slots)


def _realized_prefix(
    state_slots: Sequence[Sequence[str]],
    open_slot: int,
    tuple_: ScoredTuple,
    s1: Sequence[str],
    t1_label: str,
    t2_label: str,
) -> list[str]:
    """Left context for the next decoded token of one tuple's rendering."""
    anchors = (tuple_.u, t1_label, tuple_.v, t2_label)
    prefix = list(s1)
    for i in range(open_slot + 1):
        prefix.extend(state_slots[i])
        if i < open_slot:
            prefix.append(anchors[i])
    return prefix


def _closure_token(tuple_: ScoredTuple, slot_index: int, t1_label: str, t2_label: str) -> str:
    return (tuple_.u, t1_label, tuple_.v, t2_label)[slot_index]


class _Searcher:
    def __init__(
        self,
        tuples: Sequence[ScoredTuple],
        oracle: LikelihoodOracle,
        context_pairs: Mapping[TupleKey, ContextPair],
        t1_label: str,
        t2_label: str,
        vocab: Sequence[str],
        max_slot_len: int,
    ):
        self.tuples = list(tuples)
        self.oracle = oracle
        self.t1 = t1_label
        self.t2 = t2_label
        self.vocab = list(vocab)
        self.max_slot_len = max_slot_len
        self.contexts = {}
        for t in self.tuples:
            key = (t.w, t.u, t.v)
            if key not in context_pairs:
                raise TemplateError(f"missing context pair for tuple {key}")
            self.contexts[t] = context_pairs[key]

    def aggregate_continuations(self, state: SearchState) -> tuple[list[float], float]:
        """Summed log-probabilities of each vocab token and of slot closure."""
        totals = [0.0] * len(self.vocab)
        close_total = 0.0
        for t in self.tuples:
            s1, _ = self.contexts[t]
            prefix = _realized_prefix(
                state.slots, state.open_slot, t, s1, self.t1, self.t2
            )
            candidates = [[tok] for tok in self.vocab]
            candidates.append([_closure_token(t, state.open_slot, self.t1, self.t2)])
            values = self.oracle.logprob(prefix, candidates)
            for j in range(len(self.vocab)):
                totals[j] += values[j]
            close_total += values[-1]
        return totals, close_total

    def settle(self, state: SearchState):
        """Apply forced closures; return a completed state or a live state
        paired with its cached continuation scores.

        A slot closes when its next non-slot token outranks every vocabulary
        continuation (summed over tuples), or at the length cap.
        """
        while state.open_slot < 4:
            run = state.slots[state.open_slot]
            if len(run) >= self.max_slot_len:
                state = SearchState(state.slots, state.open_slot + 1, state.loglik)
                continue
            totals, close_total = self.aggregate_continuations(state)
            if not self.vocab or close_total > max(totals):
                state = SearchState(state.slots, state.open_slot + 1, state.loglik)
                continue
            return state, totals
        return state, None

    def expand(self, state: SearchState, totals: list[float]) -> list[SearchState]:
        children = []
        for j, token in enumerate(self.vocab):
            slots = list(state.slots)
            slots[state.open_slot] = slots[state.open_slot] + (token,)
            children.append(
                SearchState(tuple(slots), state.open_slot, state.loglik + totals[j])
            )
        return children


def _state_to_template(state: SearchState) -> Template:
    elements: list[Literal | Slot] = []
    for run, kind in zip(state.slots, ("U", "T1", "V", "T2")):
        elements.extend(Literal(tok) for tok in run)
        elements.append(Slot(kind=kind))
    return Template(tuple(elements), origin="auto", loglik=state.loglik)


def search_templates(
    tuples: TupleSet | Sequence[ScoredTuple],
    oracle: LikelihoodOracle,
    context_pairs: Mapping[TupleKey, ContextPair],
    t1_label: str,
    t2_label: str,
    beam_width: int = 100,
    max_slot_len: int = 5,
    top_n: int = 10,
    vocab: Sequence[str] | None = None,
) -> list[Template]:
    """Induce templates by beam search over the four literal runs.

    Runs decode left to right, one token per step; every live state carries
    the log-likelihood of its tokens summed over all covered tuples.
    ``vocab`` is the candidate token pool; it defaults to the oracle's
    declared vocabulary. Returns the ``top_n`` distinct templates, best
    first.
    """
    tuple_list = list(tuples)
    if not tuple_list:
        raise ValueError("tuple set is empty")
    if beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    if vocab is None:
        if oracle.info.vocab is None:
            raise ValueError("oracle does not declare a vocabulary; pass vocab=")
        vocab = sorted(oracle.info.vocab)
    else:
        vocab = sorted(set(vocab))

    searcher = _Searcher(
        tuple_list, oracle, context_pairs, t1_label, t2_label, vocab, max_slot_len
    )
    completed: dict[str, SearchState] = {}

    def collect(state: SearchState) -> None:
        key = _normalize_form(_state_to_template(state).placeholder_string())
        best = completed.get(key)
        if best is None or state.loglik > best.loglik:
            completed[key] = state

    root = SearchState(((), (), (), ()), 0, 0.0)
    settled, totals = searcher.settle(root)
    beam: list[tuple[SearchState, list[float]]] = []
    if totals is None:
        collect(settled)
    else:
        beam.append((settled, totals))

    while beam:
        # Rank raw children first and settle only the surviving ones, so a
        # width of 1 is exactly greedy decoding.
        children: list[SearchState] = []
        for state, totals in beam:
            children.extend(searcher.expand(state, totals))
        children.sort(key=lambda s: s.sort_key())
        beam = []
        for child in children[:beam_width]:
            settled, child_totals = searcher.settle(child)
            if child_totals is None:
                collect(settled)
            else:
                beam.append((settled, child_totals))

    ranked = sorted(
        completed.values(), key=lambda s: (-s.loglik, s.slots)
    )
    return [_state_to_template(s) for s in ranked[:top_n]]


def _normalize_form(placeholder_string: str) -> str:
    return " ".join(placeholder_string.casefold().split())


def aggregate_loglik(
    template: Template,
    tuples: TupleSet | Sequence[ScoredTuple],
    oracle: LikelihoodOracle,
    context_pairs: Mapping[TupleKey, ContextPair],
    t1_label: str,
    t2_label: str,
) -> float:
    """Coverage-summed log-likelihood of a slot-generation-form template.

    Only the literal run tokens are scored; anchor tokens and timestamp
    labels extend the conditioning context without contributing terms.
    """
    runs = _literal_runs(template)
    total = 0.0
    for t in tuples:
        key = (t.w, t.u, t.v)
        if key not in context_pairs:
            raise TemplateError(f"missing context pair for tuple {key}")
        s1, _ = context_pairs[key]
        anchors = (t.u, t1_label, t.v, t2_label)
        prefix = list(s1)
        for run, anchor in zip(runs, anchors):
            for token in run:
                total += oracle.logprob(prefix, [[token]])[0]
                prefix.append(token)
            prefix.append(anchor)
    return total


def _literal_runs(template: Template) -> tuple[list[str], list[str], list[str], list[str]]:
    """Split a (U, T1, V, T2)-form template into its four literal runs."""
    if template.slot_kinds() != ("U", "T1", "V", "T2"):
        raise TemplateError(
            "template is not in slot-generation form; expected slots (U, T1, V, T2), "
            f"got {template.slot_kinds()}"
        )
    runs: list[list[str]] = [[]]
    for e in template.elements:
        if isinstance(e, Slot):
            runs.append([])
        else:
            runs[-1].append(e.text)
    if runs[-1]:
        raise TemplateError("literal tokens after the final slot are not scoreable")
    return runs[0], runs[1], runs[2], runs[3]


#: Ready-made manual templates covering all five slot kinds.
DEFAULT_TEMPLATE_STRINGS = (
    "<w> is associated with <u> in <T1>, whereas it is associated with <v> in <T2>.",
    "The meaning of <w> changed from <T1> to <T2> respectively from <u> to <v>.",
)


def default_templates() -> list[Template]:
    return [parse_template(s) for s in DEFAULT_TEMPLATE_STRINGS]

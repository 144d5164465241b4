"""Template parsing, filling, file IO, and the induction search."""

import math

import pytest

from helpers import exhaustive_search, greedy_decode, runs_to_template
from tempadapt import corpus, oracle, templates
from tempadapt.oracle import OracleInfo
from tempadapt.templates import (
    Literal,
    Slot,
    Template,
    TemplateError,
    aggregate_loglik,
    default_templates,
    fill,
    load_templates,
    parse_template,
    save_templates,
    search_templates,
    select_context_pairs,
)
from tempadapt.tuples import ScoredTuple

MANUAL = "<w> is associated with <u> in <T1>, whereas it is associated with <v> in <T2>."
TUP = ScoredTuple(w="mask", u="hide", v="vaccine", score=1.0, method="freq")


class TestParse:
    def test_manual_template_slot_order(self):
        t = parse_template(MANUAL)
        assert t.slot_kinds() == ("W", "U", "T1", "V", "T2")
        assert t.origin == "manual"

    def test_angle_bracket_unicode_variant(self):
        t = parse_template("⟨u⟩ in ⟨T1⟩ ⟨v⟩ in ⟨T2⟩")
        assert t.slot_kinds() == ("U", "T1", "V", "T2")

    def test_duplicate_placeholder_rejected(self):
        with pytest.raises(TemplateError, match="duplicate"):
            parse_template("<u> then <u> again")

    def test_unknown_placeholder_rejected(self):
        with pytest.raises(TemplateError, match="unknown placeholder"):
            parse_template("<u> and <x>")

    def test_no_placeholders_warns(self):
        with pytest.warns(UserWarning, match="no placeholders"):
            t = parse_template("just plain words.")
        assert t.slot_kinds() == ()

    def test_punctuation_stays_glued_to_slot(self):
        t = parse_template("in <T1>, later")
        slot = [e for e in t.elements if isinstance(e, Slot)][0]
        assert slot.suffix == ","


class TestFill:
    def test_manual_fill_is_byte_exact(self):
        out = fill(parse_template(MANUAL), TUP, "2010", "2020")
        assert out == (
            "mask is associated with hide in 2010, "
            "whereas it is associated with vaccine in 2020."
        )

    def test_short_auto_form(self):
        t = parse_template("<u> in <T1> <v> in <T2>")
        assert fill(t, TUP, "2010", "2020") == "hide in 2010 vaccine in 2020"

    def test_all_literal_unchanged(self):
        with pytest.warns(UserWarning):
            t = parse_template("nothing here.")
        assert fill(t, TUP, "2010", "2020") == "nothing here."

    def test_unresolvable_slot(self):
        t = parse_template("<w> and <u> and <v> at <T1>/<T2>")
        bad = ScoredTuple(w="", u="hide", v="vaccine", score=0.0, method="freq")
        with pytest.raises(TemplateError, match="unresolvable slot W"):
            fill(t, bad, "2010", "2020")

    def test_fill_parse_identity_on_slot_layout(self):
        filled = fill(parse_template(MANUAL), TUP, "2010", "2020")
        # substitute the known values back with placeholders and re-parse
        restored = (
            filled.replace("mask", "<w>")
            .replace("hide", "<u>")
            .replace("vaccine", "<v>")
            .replace("2010", "<T1>")
            .replace("2020", "<T2>")
        )
        assert parse_template(restored).slot_kinds() == ("W", "U", "T1", "V", "T2")


class TestTemplateFile:
    def test_round_trip(self, tmp_path):
        manual = parse_template(MANUAL)
        auto = Template(
            (Slot("U"), Literal("in"), Slot("T1"), Literal("and"), Slot("V"),
             Literal("in"), Slot("T2")),
            origin="auto",
            loglik=-3.25,
        )
        path = tmp_path / "templates.txt"
        save_templates([manual, auto], path)
        back = load_templates(path)
        assert back[0] == manual
        assert back[1] == auto
        assert back[1].loglik == -3.25
        assert back[1].origin == "auto"

    def test_auto_line_has_tab_separated_loglik(self, tmp_path):
        auto = Template((Slot("U"), Slot("T1"), Slot("V"), Slot("T2")), "auto", -1.5)
        path = tmp_path / "t.txt"
        save_templates([auto], path)
        assert path.read_text() == "<u> <T1> <v> <T2>\t-1.5\n"


class TestContextPairs:
    def test_shortest_sentence_wins(self):
        snap1 = corpus.Snapshot.from_sentences(
            [["we", "hide", "well", "today"], ["we", "hide"]], "2010"
        )
        snap2 = corpus.Snapshot.from_sentences(
            [["a", "vaccine"], ["every", "vaccine", "works"]], "2020"
        )
        pairs = select_context_pairs([TUP], snap1, snap2)
        s1, s2 = pairs[("mask", "hide", "vaccine")]
        assert s1 == ("we", "hide")
        assert s2 == ("a", "vaccine")

    def test_length_ties_break_lexicographically(self):
        snap1 = corpus.Snapshot.from_sentences(
            [["z", "hide"], ["a", "hide"]], "2010"
        )
        snap2 = corpus.Snapshot.from_sentences([["x", "vaccine"]], "2020")
        pairs = select_context_pairs([TUP], snap1, snap2)
        assert pairs[("mask", "hide", "vaccine")][0] == ("a", "hide")

    def test_missing_anchor_errors(self):
        snap1 = corpus.Snapshot.from_sentences([["nothing", "here"]], "2010")
        snap2 = corpus.Snapshot.from_sentences([["a", "vaccine"]], "2020")
        with pytest.raises(TemplateError, match="contains 'hide'"):
            select_context_pairs([TUP], snap1, snap2)


class ConstantOracle:
    """Assigns a fixed log-probability to every single-token continuation."""

    def __init__(self, value, vocab=("in", "and")):
        self.value = value
        self.info = OracleInfo("const", frozenset(vocab), None)

    def logprob(self, prefix, candidates):
        return [self.value * len(c) for c in candidates]


PAIRS = {("mask", "hide", "vaccine"): (("we", "hide"), ("a", "vaccine"))}


class TestAggregateLoglik:
    def test_four_single_token_slots_sum(self):
        t = runs_to_template(((("in",)), ("in",), ("in",), ("in",)))
        got = aggregate_loglik(t, [TUP], ConstantOracle(-1.0), PAIRS, "2010", "2020")
        assert got == pytest.approx(-4.0, abs=1e-12)

    def test_doubling_tuples_doubles_loglik(self):
        t = runs_to_template((("in",), (), ("and",), ()))
        one = aggregate_loglik(t, [TUP], ConstantOracle(-0.7), PAIRS, "2010", "2020")
        two = aggregate_loglik(t, [TUP, TUP], ConstantOracle(-0.7), PAIRS, "2010", "2020")
        assert two == pytest.approx(2 * one, abs=1e-12)

    def test_matches_hand_computed_ngram_sum(self):
        sentences = [
            ["we", "hide", "in", "houses"],
            ["a", "vaccine", "in", "demand"],
            ["hide", "and", "seek"],
            ["vaccine", "and", "masks"],
        ]
        lm = oracle.train_ngram(
            [corpus.Snapshot.from_sentences(sentences, "c")], n=2, alpha=0.5
        )
        tuples_ = [
            TUP,
            ScoredTuple(w="mask", u="seek", v="masks", score=1.0, method="freq"),
            ScoredTuple(w="mask", u="houses", v="demand", score=1.0, method="freq"),
        ]
        pairs = {
            ("mask", "hide", "vaccine"): (("we", "hide"), ("a", "vaccine")),
            ("mask", "seek", "masks"): (("hide", "and", "seek"), ("vaccine",)),
            ("mask", "houses", "demand"): (("we",), ("a",)),
        }
        template = runs_to_template((("in",), (), ("and",), ("in",)))
        # independent accumulation: walk each realized sequence token by token
        expected = 0.0
        for tup in tuples_:
            s1, _ = pairs[(tup.w, tup.u, tup.v)]
            seq_scored = [
                (list(s1), "in"),
                (list(s1) + ["in", tup.u, "2010"], "and"),
                (list(s1) + ["in", tup.u, "2010", "and", tup.v], "in"),
            ]
            for prefix, token in seq_scored:
                expected += lm.logprob(prefix, [[token]])[0]
        got = aggregate_loglik(template, tuples_, lm, pairs, "2010", "2020")
        assert got == pytest.approx(expected, abs=1e-12)

    def test_rejects_wrong_form(self):
        with pytest.raises(TemplateError, match="slot-generation form"):
            aggregate_loglik(
                parse_template(MANUAL), [TUP], ConstantOracle(-1.0), PAIRS, "2010", "2020"
            )

    def test_rejects_trailing_literals(self):
        t = Template(
            (Slot("U"), Slot("T1"), Slot("V"), Slot("T2"), Literal("tail")), "manual"
        )
        with pytest.raises(TemplateError, match="after the final slot"):
            aggregate_loglik(t, [TUP], ConstantOracle(-1.0), PAIRS, "2010", "2020")


class ForcedOracle:
    """Log-prob 0 for the token 'in', −inf for everything else."""

    info = OracleInfo("forced", frozenset({"in", "x"}), None)

    def logprob(self, prefix, candidates):
        return [0.0 if all(t == "in" for t in c) else float("-inf") for c in candidates]


def _tiny_corpus_oracle():
    sentences = [
        "hide in winter and in summer".split(),
        "vaccine in demand and in stock".split(),
        "hide and seek in town".split(),
        "vaccine in town and hide in stock".split(),
    ]
    snap = corpus.Snapshot.from_sentences(sentences, "c")
    return oracle.train_ngram([snap], n=3, alpha=0.1)


class TestSearch:
    def test_forced_decoding_fills_every_slot_with_in(self):
        result = search_templates(
            [TUP], ForcedOracle(), PAIRS, "2010", "2020",
            beam_width=3, max_slot_len=2, top_n=1,
        )
        best = result[0]
        assert best.loglik == 0.0
        runs = [[], [], [], []]
        idx = 0
        for e in best.elements:
            if isinstance(e, Slot):
                idx += 1
            else:
                runs[idx].append(e.text)
        assert all(r == ["in", "in"] for r in runs)

    def test_empty_tuple_set_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            search_templates([], ForcedOracle(), PAIRS, "2010", "2020")

    def test_beam_one_equals_greedy(self):
        lm = _tiny_corpus_oracle()
        vocab = ["and", "in", "town"]
        result = search_templates(
            [TUP], lm, PAIRS, "2010", "2020",
            beam_width=1, max_slot_len=2, top_n=1, vocab=vocab,
        )
        runs, loglik = greedy_decode(lm, [TUP], PAIRS, "2010", "2020", vocab, 2)
        assert result[0] == runs_to_template(runs)
        assert result[0].loglik == pytest.approx(loglik, abs=1e-12)

    def test_saturated_beam_matches_exhaustive_enumeration(self):
        lm = _tiny_corpus_oracle()
        vocab = ["and", "in"]
        enumerated = exhaustive_search(lm, [TUP], PAIRS, "2010", "2020", vocab, 1)
        result = search_templates(
            [TUP], lm, PAIRS, "2010", "2020",
            beam_width=10_000, max_slot_len=1, top_n=len(enumerated), vocab=vocab,
        )
        assert result[0] == runs_to_template(enumerated[0][1])
        assert result[0].loglik == pytest.approx(enumerated[0][0], abs=1e-9)
        # the whole ranked list agrees
        assert [t.loglik for t in result] == pytest.approx(
            [ll for ll, _ in enumerated], abs=1e-9
        )

    def test_beam_width_monotonicity(self):
        lm = _tiny_corpus_oracle()
        vocab = ["and", "in", "town"]
        best = []
        for width in (1, 2, 4, 100_000):
            r = search_templates(
                [TUP], lm, PAIRS, "2010", "2020",
                beam_width=width, max_slot_len=2, top_n=1, vocab=vocab,
            )
            best.append(r[0].loglik)
        assert best == sorted(best)

    def test_logliks_non_increasing_and_covering(self):
        lm = _tiny_corpus_oracle()
        result = search_templates(
            [TUP], lm, PAIRS, "2010", "2020",
            beam_width=8, max_slot_len=2, top_n=6, vocab=["and", "in"],
        )
        values = [t.loglik for t in result]
        assert values == sorted(values, reverse=True)
        for t in result:
            text = fill(t, TUP, "2010", "2020")
            for expected in ("hide", "vaccine", "2010", "2020"):
                assert expected in text

    def test_search_loglik_matches_aggregate_recomputation(self):
        lm = _tiny_corpus_oracle()
        result = search_templates(
            [TUP], lm, PAIRS, "2010", "2020",
            beam_width=8, max_slot_len=2, top_n=4, vocab=["and", "in"],
        )
        for t in result:
            recomputed = aggregate_loglik(t, [TUP], lm, PAIRS, "2010", "2020")
            assert t.loglik == pytest.approx(recomputed, abs=1e-9)

    def test_templates_are_distinct(self):
        lm = _tiny_corpus_oracle()
        result = search_templates(
            [TUP], lm, PAIRS, "2010", "2020",
            beam_width=16, max_slot_len=2, top_n=10, vocab=["and", "in"],
        )
        forms = [t.placeholder_string() for t in result]
        assert len(forms) == len(set(forms))


class TestDefaults:
    def test_default_templates_fill(self):
        for t in default_templates():
            text = fill(t, TUP, "2010", "2020")
            assert "hide" in text and "vaccine" in text

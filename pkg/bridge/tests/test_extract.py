"""Contextual embedding extraction against manual forward passes."""

import numpy as np
import pytest
import torch

from mlmbridge.config import BridgeConfig
from mlmbridge.extract import extract_embeddings, _sample_occurrences
from mlmbridge.models import load_mlm


@pytest.fixture()
def sentences_file(tmp_path):
    path = tmp_path / "train.txt"
    path.write_text(
        "mask hide in the city\n"
        "people hide from the crowd\n"
        "they hide in winter\n"
        "a vaccine in summer\n",
        encoding="utf-8",
    )
    return path


def config_for(model_dir):
    return BridgeConfig(model=str(model_dir), learning_rate=1e-3, epochs=1)


class TestSampling:
    def test_under_cap_keeps_all(self):
        sentences = [["w", "a"], ["b", "w"], ["w", "w"]]
        got = _sample_occurrences(sentences, "w", cap=1000, seed=1)
        assert got == [(0, 0), (1, 1), (2, 0), (2, 1)]

    def test_cap_limits_and_is_deterministic(self):
        sentences = [["w", f"x{i}"] for i in range(50)]
        first = _sample_occurrences(sentences, "w", cap=5, seed=9)
        second = _sample_occurrences(sentences, "w", cap=5, seed=9)
        assert first == second
        assert len(first) == 5


class TestExtract:
    def test_one_record_per_occurrence(self, sentences_file, tiny_mlm_dir, tmp_path):
        out = tmp_path / "emb.tsv"
        n = extract_embeddings(sentences_file, ["hide"], config_for(tiny_mlm_dir), out, "2010")
        assert n == 3
        lines = out.read_text().splitlines()
        assert lines[0].startswith("EMB\t2010\t32\t3")

    def test_absent_word_zero_records(self, sentences_file, tiny_mlm_dir, tmp_path):
        out = tmp_path / "emb.tsv"
        n = extract_embeddings(sentences_file, ["absent"], config_for(tiny_mlm_dir), out, "2010")
        assert n == 0
        assert out.read_text() == "EMB\t2010\t32\t0\n"

    def test_subtoken_average_matches_manual_forward(
        self, sentences_file, tiny_mlm_dir, tmp_path
    ):
        out = tmp_path / "emb.tsv"
        n = extract_embeddings(sentences_file, ["vaccine"], config_for(tiny_mlm_dir), out, "2010")
        assert n == 1
        row = out.read_text().splitlines()[1].split("\t")
        got = np.array([float(v) for v in row[1:]])

        tokenizer, mlm = load_mlm(str(tiny_mlm_dir))
        words = "a vaccine in summer".split()
        encoded = tokenizer(words, is_split_into_words=True, return_tensors="pt")
        with torch.no_grad():
            hidden = mlm(**encoded, output_hidden_states=True).hidden_states[-1][0]
        rows = [k for k, w in enumerate(encoded.word_ids()) if w == 1]
        assert len(rows) == 2  # 'vaccine' splits into two pieces
        expected = hidden[rows].mean(dim=0).numpy()
        assert np.allclose(got, expected, atol=1e-6)

    def test_occurrence_cap_respected(self, tiny_mlm_dir, tmp_path):
        path = tmp_path / "many.txt"
        path.write_text("\n".join("hide in the city" for _ in range(8)) + "\n")
        cfg = BridgeConfig(model=str(tiny_mlm_dir), occurrence_cap=3, learning_rate=1e-3)
        out = tmp_path / "emb.tsv"
        assert extract_embeddings(path, ["hide"], cfg, out, "2010") == 3

    def test_loads_into_core_table(self, sentences_file, tiny_mlm_dir, tmp_path):
        tempadapt_embeddings = pytest.importorskip("tempadapt.embeddings")
        out = tmp_path / "emb.tsv"
        extract_embeddings(
            sentences_file, ["hide", "vaccine", "absent"], config_for(tiny_mlm_dir), out, "2010"
        )
        table = tempadapt_embeddings.load_table(out)
        assert table.dimension == 32
        assert table.occurrence_count("hide") == 3
        assert np.all(table.lookup("absent") == 0.0)
        assert np.all(np.isfinite(table.lookup("hide")))

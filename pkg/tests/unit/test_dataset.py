"""
Unit Tests for dataset files
"""

import pytest

from amtl.corruption import inject_errors
from amtl.dataset import (
    encode_corpus,
    read_pairs,
    read_sentences,
    split_holdout,
    write_pairs,
    write_sentences,
)
from amtl.errors import ContractError, EmptyCorpusError
from tests.mock_data import MockDataGenerator


class TestSentenceFiles:
    """Test sentence and pair files."""

    def test_sentences_skip_headers(self, tmp_path):
        """Test headers are written and skipped on read."""
        path = tmp_path / "corpus.txt"
        write_sentences(path, ["KaDfidor", "GuNepa"], ["train.seed=0"])
        assert path.read_text(encoding="utf-8").splitlines()[:2] == [
            "#!amtl format_version=1",
            "#!amtl train.seed=0",
        ]
        assert read_sentences(path) == ["KaDfidor", "GuNepa"]

    def test_empty_file(self, tmp_path):
        """Test a file without sentences is an empty corpus."""
        path = tmp_path / "empty.txt"
        write_sentences(path, [])
        with pytest.raises(EmptyCorpusError):
            read_sentences(path)

    def test_pairs(self, tmp_path):
        """Test pair records survive a write and read."""
        vocab = MockDataGenerator.vocab()
        records = [inject_errors(s, seed=i) for i, s in enumerate(MockDataGenerator.corpus(5))]
        path = tmp_path / "pairs.tsv"
        write_pairs(path, records, vocab)
        read = read_pairs(path, vocab)
        assert [(r[0], r[1], r[2], r[3]) for r in read] == [
            (r.corrupted, r.clean, r.span_start, r.span_end) for r in records
        ]

    @pytest.mark.parametrize("line", ["KaDfidor\tKaDfidor\t1", "KaDfidor\tKaDfidor\ta\t2"])
    def test_malformed_pairs(self, tmp_path, line):
        """Test bad lines name their location."""
        path = tmp_path / "bad.tsv"
        path.write_text(line + "\n", encoding="utf-8")
        with pytest.raises(ContractError, match="bad.tsv:1"):
            read_pairs(path, MockDataGenerator.vocab())


class TestCorpusHelpers:
    """Test encoding and the held-out split."""

    def test_encode_builds_vocab(self):
        """Test raw text gets its own vocabulary."""
        vocab, corpus = encode_corpus(["abcdef", "fedcba"])
        assert vocab.chars == list("abcdef")
        assert vocab.decode(corpus[1]) == "fedcba"

    def test_split_deterministic(self):
        """Test the split is a function of the seed and partitions the corpus."""
        corpus = MockDataGenerator.corpus(n=20, seed=0)
        train, held = split_holdout(corpus, 0.25, seed=3)
        assert (train, held) == split_holdout(corpus, 0.25, seed=3)
        assert len(held) == 5 and len(train) == 15
        assert sorted(train + held, key=corpus.index) == corpus

    @pytest.mark.parametrize("fraction,held", [(0.0, 0), (0.01, 1), (0.99, 3)])
    def test_split_bounds(self, fraction, held):
        """Test a positive fraction holds out at least one and never everything."""
        corpus = MockDataGenerator.corpus(n=4, seed=0)
        assert len(split_holdout(corpus, fraction, seed=0)[1]) == held

    def test_split_empty(self):
        """Test an empty corpus cannot be split."""
        with pytest.raises(EmptyCorpusError):
            split_holdout([], 0.1, seed=0)

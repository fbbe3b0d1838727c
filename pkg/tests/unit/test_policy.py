"""
Unit Tests for the policy span learner

Difference spans, range supervision, the overlap coefficient, the range
loss and the supervision cache.
"""

import itertools

import numpy as np
import pytest

from amtl.config import PolicyConfig
from amtl.correction import Corrector
from amtl.errors import ContractError, EmptyCorpusError, NoDiffError
from amtl.models import SpanBounds, TokenSeq
from amtl.policy import (
    diff_span,
    fit_policy,
    generate_supervision,
    inclusive,
    overlap_coeff,
    policy_loss,
    range_bounds,
    read_supervision,
    supervise,
    write_supervision,
)
from amtl.tensor import Tensor
from tests.mock_data import MockDataGenerator


def seq(*ids):
    return TokenSeq(ids=tuple(ids))


class TestDiffSpan:
    """Test the minimal differing window."""

    @pytest.mark.parametrize(
        "a,b,expected",
        [
            ((4, 5, 6, 7), (4, 9, 6, 7), (1, 2)),  # substitution
            ((4, 5, 6, 7), (4, 6, 7), (1, 2)),  # extra character in a
            ((4, 6, 7), (4, 5, 6, 7), (1, 1)),  # missing character in a
            ((4, 4, 4), (4, 4), (2, 3)),  # repeated characters keep the prefix
            ((4, 5), (6, 7), (0, 2)),
        ],
    )
    def test_spans(self, a, b, expected):
        """Test hand-worked difference windows."""
        assert diff_span(seq(*a), seq(*b)) == expected

    def test_identical(self):
        """Test equal sequences have no difference."""
        with pytest.raises(NoDiffError):
            diff_span(seq(4, 5), seq(4, 5))

    def test_window_explains_difference(self):
        """Test replacing the window in a reproduces b, on random pairs."""
        rng = np.random.default_rng(0)
        for _ in range(500):
            a = tuple(int(v) for v in rng.integers(4, 7, size=rng.integers(1, 8)))
            b = tuple(int(v) for v in rng.integers(4, 7, size=rng.integers(1, 8)))
            if a == b:
                continue
            start, end = diff_span(seq(*a), seq(*b))
            tail = len(a) - end
            assert a[:start] == b[:start]
            assert a[end:] == b[len(b) - tail :]
            assert start + tail <= min(len(a), len(b))

    def test_short_strings_exhaustive(self):
        """Test every pair of distinct short strings over two symbols has a window."""
        words = [seq(*w) for n in (1, 2) for w in itertools.product((4, 5), repeat=n)]
        for a, b in itertools.permutations(words, 2):
            start, end = diff_span(a, b)
            assert 0 <= start <= end <= a.k


class TestRangeBounds:
    """Test range supervision and its brute-force overlap."""

    def test_inclusive(self):
        """Test half-open to inclusive conversion and zero-width spans."""
        assert inclusive((2, 5), 8) == (2, 4)
        assert inclusive((3, 3), 8) == (3, 3)
        assert inclusive((8, 8), 8) == (7, 7)

    def test_bounds_cover_both_spans(self):
        """Test ranges from the minimum to the maximum of both starts and ends."""
        b = range_bounds(2, 4, 3, 6)
        assert (b.S_l, b.S_h, b.E_l, b.E_h) == (2, 3, 4, 6)

    def test_strict_end_low(self):
        """Test the end minimum from the corrected span start."""
        b = range_bounds(2, 4, 3, 6, strict=True)
        assert (b.E_l, b.E_h) == (3, 6)

    def test_brute_force_tuples(self):
        """Test ranges and overlap against enumeration on 10^4 span pairs."""
        rng = np.random.default_rng(1)
        for _ in range(10_000):
            a_s, a_e = sorted(int(v) for v in rng.integers(0, 12, size=2))
            c_s, c_e = sorted(int(v) for v in rng.integers(0, 12, size=2))
            b = range_bounds(a_s, a_e, c_s, c_e)
            starts, ends = {a_s, c_s}, {a_e, c_e}
            assert all(b.S_l <= v <= b.S_h for v in starts)
            assert {b.S_l, b.S_h} <= starts
            assert all(b.E_l <= v <= b.E_h for v in ends)
            assert {b.E_l, b.E_h} <= ends
            a_cells, c_cells = set(range(a_s, a_e)), set(range(c_s, c_e))
            expected = (
                1.0
                if not a_cells and not c_cells
                else 0.0
                if not a_cells or not c_cells
                else len(a_cells & c_cells) ** 2 / (len(a_cells) * len(c_cells))
            )
            assert overlap_coeff((a_s, a_e), (c_s, c_e)) == pytest.approx(expected)

    @pytest.mark.parametrize(
        "a,b,expected",
        [
            ((0, 4), (0, 4), 1.0),
            ((0, 4), (2, 6), 0.25),
            ((0, 2), (2, 4), 0.0),
            ((1, 1), (0, 3), 0.0),
        ],
    )
    def test_overlap_table(self, a, b, expected):
        """Test overlap on hand-worked spans."""
        assert overlap_coeff(a, b) == pytest.approx(expected)

    def test_overlap_reversed_span(self):
        """Test a span ending before it starts is rejected."""
        with pytest.raises(ContractError):
            overlap_coeff((3, 1), (0, 2))

    def test_supervise(self):
        """Test supervision from a search that found the right span."""
        original = seq(4, 5, 6, 7, 8, 9)
        wrong = seq(4, 5, 20, 7, 8, 9)
        bounds = supervise(wrong, original, original)
        assert bounds == SpanBounds(S_l=2, S_h=2, E_l=2, E_h=2, mu=1.0)

    def test_supervise_unchanged(self):
        """Test a search that changed nothing yields no supervision."""
        wrong = seq(4, 5, 20, 7, 8, 9)
        with pytest.raises(NoDiffError):
            supervise(wrong, seq(4, 5, 6, 7, 8, 9), wrong)


class TestPolicyLoss:
    """Test the soft-argmax range loss."""

    def test_zero_at_bounds(self):
        """Test peaked logits sitting on one-point ranges give zero loss."""
        x = [0.0, 0.0, 80.0, 0.0]
        bounds = SpanBounds(S_l=2, S_h=2, E_l=2, E_h=2)
        assert policy_loss(x, x, bounds).item() == pytest.approx(0.0, abs=1e-12)

    def test_penalises_outside(self):
        """Test the loss grows when the position leaves the range."""
        bounds = SpanBounds(S_l=1, S_h=2, E_l=1, E_h=2, mu=0.5)
        inside = policy_loss([0, 80, 0, 0, 0], [0, 80, 0, 0, 0], bounds).item()
        outside = policy_loss([0, 0, 0, 0, 80], [0, 0, 0, 0, 80], bounds).item()
        assert outside > inside

    def test_accepts_policy_output(self):
        """Test the PolicyOutput form matches the logits form."""
        from amtl.models import PolicyOutput

        out = PolicyOutput(x_s=[0.1, 0.4, -0.2], x_e=[0.3, 0.0, 0.5])
        bounds = SpanBounds(S_l=0, S_h=1, E_l=1, E_h=2, mu=0.3)
        assert policy_loss(out, bounds=bounds).item() == pytest.approx(
            policy_loss(out.x_s, out.x_e, bounds).item()
        )

    def test_missing_arguments(self):
        """Test missing logits or bounds are a contract error."""
        with pytest.raises(ContractError):
            policy_loss(Tensor([0.0, 1.0]))


class TestSupervision:
    """Test supervision generation, the cache file and head training."""

    @pytest.fixture
    def vocab(self):
        return MockDataGenerator.vocab()

    @pytest.fixture
    def corpus(self):
        return MockDataGenerator.corpus(n=8, seed=7)

    def test_ground_truth_targets(self, vocab, corpus):
        """Test ground-truth supervision marks the injected span."""
        cfg = PolicyConfig(samples=10, target="ground_truth")
        samples, skipped = generate_supervision(corpus, cfg, vocab)
        assert len(samples) == 10 and skipped == 0
        for sample in samples:
            assert sample.bounds.S_l == sample.bounds.S_h
            assert sample.bounds.S_l <= sample.bounds.E_h < sample.wrong.k

    def test_search_targets_need_corrector(self, vocab, corpus):
        """Test search supervision without a corrector is refused."""
        with pytest.raises(ContractError):
            generate_supervision(corpus, PolicyConfig(samples=2), vocab)

    def test_short_corpus(self, vocab):
        """Test a corpus without usable sentences raises."""
        with pytest.raises(EmptyCorpusError):
            generate_supervision([seq(4, 5)], PolicyConfig(target="ground_truth"), vocab)

    def test_search_targets_with_mock_search(self, vocab, corpus):
        """Test search supervision skips samples the search leaves unchanged."""
        from amtl import PluginManager
        from tests.mock_data import MockFillerPlugin, MockScorerPlugin

        pm = PluginManager()
        pm.register_plugin(MockScorerPlugin(), name="scorer")
        pm.register_plugin(MockFillerPlugin(vocab), name="filler")
        cfg = PolicyConfig(samples=12)
        samples, skipped = generate_supervision(corpus, cfg, vocab, Corrector(pm))
        assert len(samples) + skipped == 12
        assert all(0.0 <= s.bounds.mu <= 1.0 for s in samples)

    def test_cache_round_trip(self, vocab, corpus, tmp_path):
        """Test the cache file restores samples exactly."""
        samples, _ = generate_supervision(
            corpus, PolicyConfig(samples=5, target="ground_truth"), vocab
        )
        path = tmp_path / "policy.cache"
        write_supervision(path, samples, vocab, ["policy.samples=5"])
        text = path.read_text(encoding="utf-8")
        assert text.startswith("#!amtl format_version=1\n#!amtl policy.samples=5\n")
        assert read_supervision(path, vocab) == samples

    def test_cache_malformed(self, vocab, tmp_path):
        """Test a short line is reported with its line number."""
        path = tmp_path / "bad.cache"
        path.write_text("KaDfidor\t1\t2\n", encoding="utf-8")
        with pytest.raises(ContractError, match=":1:"):
            read_supervision(path, vocab)

    def test_fit_updates_only_policy_heads(self, vocab, corpus):
        """Test policy training leaves the encoder and LM heads untouched."""
        model = MockDataGenerator.tiny_model(seed=6)
        before = {n: p.data.copy() for n, p in model.named_parameters()}
        cfg = PolicyConfig(samples=6, epochs=2, batch=3, target="ground_truth", lr=0.01)
        samples, _ = generate_supervision(corpus, cfg, vocab)
        history = fit_policy(model, samples, cfg)
        assert len(history) == 2
        changed = {n for n, p in model.named_parameters() if not np.array_equal(p.data, before[n])}
        assert changed
        assert all(n.startswith(("policy_start.", "policy_end.")) for n in changed)

    def test_fit_without_samples(self):
        """Test training on nothing raises."""
        with pytest.raises(EmptyCorpusError):
            fit_policy(MockDataGenerator.tiny_model(), [], PolicyConfig())

"""
Unit Tests for the correction search

The full search is checked against a brute-force oracle that calls the
plugins directly, on many sentences with mock, count-based and trained models.
"""

from pathlib import Path

import pytest

from amtl import PluginManager
from amtl.config import CorrectorConfig, load_config
from amtl.correction import (
    Corrector,
    detect_peak,
    explain,
    predicted_span,
    round_half_up,
    viable,
)
from amtl.corruption import inject_errors
from amtl.errors import ContractError
from amtl.models import MASK_ID, PolicyOutput, TokenSeq
from amtl.plugins.bigram_lm import BigramLMPlugin
from amtl.trainer import fit
from pipeline import FillingPlugin, ScoringPlugin, build_plugin_manager
from tests.mock_data import (
    MockDataGenerator,
    MockFillerPlugin,
    MockPolicyPlugin,
    MockScorerPlugin,
)


def brute_force(s, scorer, filler, width, depth, max_tokens=62):
    """
    Best (norm_score, cost, p_s, num, p_e) edit, straight from the plugins.

    Candidates are filled and scored in one batch each, in enumeration order,
    so a network answers with the same floats the search sees.
    """
    scores = scorer.amtl_score_tokens([s])[0].scores
    p_m = max(range(s.k), key=lambda i: (scores[i], -i))
    options = []
    for p_s in range(max(0, p_m - width), p_m + 1):
        for p_e in range(p_m + 1, min(s.k, p_m + 1 + width) + 1):
            for num in range(depth + 1):
                options.append((p_s, p_e, num))
    options.append((p_m, p_m, 0))
    options = [(a, b, n) for a, b, n in options if 0 < s.k - (b - a) + n <= max_tokens]
    masked = [TokenSeq(ids=s.ids[:a] + (MASK_ID,) * n + s.ids[b:]) for a, b, n in options]
    needing = [i for i, (_, _, num) in enumerate(options) if num]
    filled = list(masked)
    if needing:
        answers = filler.amtl_fill_masks([masked[i] for i in needing], "simultaneous")
        for i, f in zip(needing, answers):
            filled[i] = f
    best = None
    for (p_s, p_e, num), f, sv in zip(options, filled, scorer.amtl_score_tokens(filled)):
        values = sv.scores
        key = (sum(values) / len(values), (p_e - p_s) + num, p_s, num, p_e)
        if best is None or key < best[0]:
            best = (key, f)
    return best


def _corrupted(n, seed):
    vocab = MockDataGenerator.vocab()
    corpus = MockDataGenerator.corpus(n=n, seed=seed)
    return [inject_errors(s, seed=seed + i, vocab=vocab).corrupted for i, s in enumerate(corpus)]


class TestSearchOracle:
    """Search output equals the brute-force minimum."""

    @pytest.mark.parametrize("width,depth", [(2, 4), (1, 2), (0, 1), (3, 3)])
    def test_mock_plugins(self, width, depth):
        """Test exact agreement with deterministic mock plugins."""
        vocab = MockDataGenerator.vocab()
        scorer, filler = MockScorerPlugin(), MockFillerPlugin(vocab)
        pm = PluginManager()
        pm.register_plugin(scorer, name="scorer")
        pm.register_plugin(filler, name="filler")
        corrector = Corrector(pm, CorrectorConfig(width=width, depth=depth))
        for s in _corrupted(200, seed=11):
            key, filled = brute_force(s, scorer, filler, width, depth)
            best = corrector.search(s).best
            assert best.filled == filled
            assert (best.norm_score, best.cost, best.p_s, best.num, best.p_e) == key

    def test_bigram_plugin(self):
        """Test exact agreement with a count-based bigram model."""
        vocab = MockDataGenerator.vocab()
        plugin = BigramLMPlugin.fit(MockDataGenerator.corpus(n=200, seed=0), vocab)
        pm = PluginManager()
        pm.register_plugin(plugin, name="bigram_lm")
        corrector = Corrector(pm, CorrectorConfig())
        for s in _corrupted(200, seed=21):
            _, filled = brute_force(s, plugin, plugin, 2, 4)
            assert corrector.search(s).best.filled == filled

    @pytest.fixture(scope="class")
    def trained(self):
        model = MockDataGenerator.tiny_model(seed=3)
        fit(model, MockDataGenerator.corpus(n=64, seed=1), MockDataGenerator.tiny_train_config())
        return model.eval()

    def test_trained_model(self, trained):
        """Test exact agreement with a trained network behind the pipeline plugins."""
        scorer, filler = ScoringPlugin(trained), FillingPlugin(trained)
        corrector = Corrector(build_plugin_manager(trained), CorrectorConfig())
        for s in _corrupted(200, seed=31):
            key, filled = brute_force(s, scorer, filler, 2, 4, trained.max_tokens)
            best = corrector.search(s).best
            assert best.filled == filled
            assert best.sort_key() == key


class TestTokenLimit:
    """Candidates never outgrow what the registered models can frame."""

    @pytest.fixture
    def desk(self):
        return load_config(Path(__file__).parents[2] / "configs" / "desk.conf")

    def test_long_sentence_with_desk_config(self, desk):
        """Test a sentence that fits the model is corrected without overflowing it."""
        model = MockDataGenerator.tiny_model(max_len=desk.model.max_len)
        s = MockDataGenerator.sequence("KaDfidor" * 4 + "GuNp")
        assert s.k == desk.model.max_len - 4
        model.score_tokens(s)
        trace = Corrector(build_plugin_manager(model), desk.corrector).search(s)
        assert all(c.filled.k <= model.max_tokens for c in trace.candidates)
        assert trace.best.filled.k <= model.max_tokens

    def test_iterative_rounds_stay_inside(self, desk):
        """Test repeated rounds never build a sentence the model rejects."""
        model = MockDataGenerator.tiny_model(max_len=desk.model.max_len)
        s = MockDataGenerator.sequence("KaDfidor" * 4 + "GuNpa")
        corrector = Corrector(build_plugin_manager(model), desk.corrector)
        for trace in corrector.trace_rounds(s, rounds=3):
            assert max(c.filled.k for c in trace.candidates) <= model.max_tokens

    def test_limit_from_plugins(self):
        """Test the tighter of the config and the plugin limits applies."""
        model = MockDataGenerator.tiny_model(max_len=20)
        pm = build_plugin_manager(model)
        assert pm.max_tokens() == 18
        assert Corrector(pm, CorrectorConfig()).max_tokens == 18
        assert Corrector(pm, CorrectorConfig(max_tokens=10)).max_tokens == 10

    def test_no_limit_from_mock_plugins(self):
        """Test plugins without a declared limit leave the config value."""
        pm = PluginManager()
        pm.register_plugin(MockScorerPlugin(), name="scorer")
        assert pm.max_tokens() is None
        assert Corrector(pm, CorrectorConfig(max_tokens=30)).max_tokens == 30


class TestSearchMechanics:
    """Peak picking, candidate filtering and pass accounting."""

    @pytest.fixture
    def pm(self):
        pm = PluginManager()
        pm.register_plugin(MockScorerPlugin(), name="scorer")
        pm.register_plugin(MockFillerPlugin(MockDataGenerator.vocab()), name="filler")
        return pm

    def test_detect_peak_ties_lowest(self):
        """Test the first maximum wins."""
        assert detect_peak([0.1, 0.7, 0.7, 0.2]) == 1

    def test_detect_peak_empty(self):
        """Test an empty score vector is rejected."""
        with pytest.raises(ContractError):
            detect_peak([])

    def test_viable_drops_empty_and_long(self):
        """Test candidates that empty the sentence or overflow are removed."""
        triples = [(0, 2, 0), (0, 1, 0), (0, 1, 4), (1, 1, 0)]
        assert viable(2, triples, max_tokens=4) == [(0, 1, 0), (1, 1, 0)]

    def test_passes_counted(self, pm):
        """Test one seed pass plus one rescoring pass per candidate."""
        trace = Corrector(pm).search(MockDataGenerator.sequence())
        assert trace.passes["seed"] == 1
        assert trace.passes["score"] == len(trace.candidates)
        assert pm.passes["score"] == 1 + len(trace.candidates)

    def test_identity_is_a_candidate(self, pm):
        """Test the unchanged sentence competes when identity is enabled."""
        s = MockDataGenerator.sequence()
        trace = Corrector(pm).search(s)
        identities = [c for c in trace.candidates if c.is_identity]
        assert len(identities) == 1
        assert identities[0].filled == s

    def test_short_sentence_filters_candidates(self, pm):
        """Test a one-character sentence never proposes an empty result."""
        trace = Corrector(pm).search(MockDataGenerator.sequence("K"))
        assert all(c.filled.k > 0 for c in trace.candidates)

    def test_empty_sentence(self, pm):
        """Test an empty sentence cannot be corrected."""
        with pytest.raises(ContractError):
            Corrector(pm).search(TokenSeq(ids=()))

    def test_explain_format(self, pm):
        """Test the explain column names the chosen edit."""
        trace = Corrector(pm).search(MockDataGenerator.sequence())
        p_s, p_e, num, score = explain(trace).split(",")
        assert (int(p_s), int(p_e), int(num)) == (trace.best.p_s, trace.best.p_e, trace.best.num)
        assert float(score) == pytest.approx(trace.best.norm_score, abs=1e-6)

    def test_rounds_stop_when_unchanged(self, pm):
        """Test repeated rounds end at a fixed point or the round limit."""
        corrector = Corrector(pm, CorrectorConfig(rounds=5))
        traces = corrector.trace_rounds(MockDataGenerator.sequence("KaDfidorGuNpa"))
        assert 1 <= len(traces) <= 5
        for before, after in zip(traces, traces[1:]):
            assert after.source == before.best.filled
        if len(traces) < 5:
            assert traces[-1].best.filled == traces[-1].source
        assert corrector.correct_iterative(MockDataGenerator.sequence("KaDfidorGuNpa")) == (
            traces[-1].best.filled
        )


class TestFastPath:
    """Policy-guided search."""

    @pytest.mark.parametrize(
        "value,expected", [(0.5, 1), (1.49, 1), (1.5, 2), (2.0, 2), (0.0, 0)]
    )
    def test_round_half_up(self, value, expected):
        """Test halves round up."""
        assert round_half_up(value) == expected

    def test_predicted_span_inclusive_end(self):
        """Test peaked logits give the half-open span through the end position."""
        out = PolicyOutput(x_s=[0, 0, 60, 0, 0, 0], x_e=[0, 0, 0, 0, 60, 0])
        assert predicted_span(out) == (2, 5)

    def test_predicted_span_swapped(self):
        """Test an end before the start is swapped and widened."""
        out = PolicyOutput(x_s=[0, 0, 0, 0, 60, 0], x_e=[0, 60, 0, 0, 0, 0])
        assert predicted_span(out) == (1, 6)

    def test_fast_search_uses_policy_span(self):
        """Test only the number of masks varies around the predicted span."""
        vocab = MockDataGenerator.vocab()
        pm = PluginManager()
        pm.register_plugin(MockScorerPlugin(), name="scorer")
        pm.register_plugin(MockFillerPlugin(vocab), name="filler")
        pm.register_plugin(MockPolicyPlugin(start=2, end=3), name="policy")
        cfg = CorrectorConfig(depth=3)
        trace = Corrector(pm, cfg).search_fast(MockDataGenerator.sequence())
        assert trace.seed_span == (2, 4)
        assert len(trace.candidates) == cfg.depth + 2
        assert {(c.p_s, c.p_e) for c in trace.candidates} == {(2, 4), (2, 2)}
        assert trace.forward_passes == 1 + cfg.depth + 2
        assert Corrector(pm, cfg).correct_fast(MockDataGenerator.sequence()) == trace.best.filled

    def test_fast_search_rounds(self):
        """Test the fast path also runs in rounds."""
        vocab = MockDataGenerator.vocab()
        pm = PluginManager()
        pm.register_plugin(MockScorerPlugin(), name="scorer")
        pm.register_plugin(MockFillerPlugin(vocab), name="filler")
        pm.register_plugin(MockPolicyPlugin(start=1, end=1), name="policy")
        traces = Corrector(pm, CorrectorConfig(rounds=3)).trace_rounds(
            MockDataGenerator.sequence(), fast=True
        )
        assert all(t.seed_span == (1, 2) for t in traces)
        assert all(len(t.candidates) == CorrectorConfig().depth + 2 for t in traces)

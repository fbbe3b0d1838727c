"""
Tests for AMTL plugin manager.

Validates Pluggy integration, plugin registration and pass counting.
"""

import pytest

from amtl import PluginManager
from amtl.errors import ContractError, NoPluginError
from amtl.models import ScoreVector
from tests.mock_data import (
    EmptyAnswerPlugin,
    MockDataGenerator,
    MockFillerPlugin,
    MockPolicyPlugin,
    MockScorerPlugin,
    mock_score,
)


class TestPluginManager:
    """Test plugin manager functionality."""

    def test_plugin_manager_creation(self):
        """Test creating a plugin manager."""
        pm = PluginManager()
        assert pm is not None
        assert len(pm.list_plugins()) == 0

    def test_register_plugin(self):
        """Test registering a plugin."""
        pm = PluginManager()
        pm.register_plugin(MockScorerPlugin(), name="test-scorer")
        assert len(pm.list_plugins()) == 1

    def test_unregister_plugin(self):
        """Test unregistering a plugin."""
        pm = PluginManager()
        plugin = MockScorerPlugin()
        pm.register_plugin(plugin)
        pm.unregister_plugin(plugin)
        assert len(pm.list_plugins()) == 0

    def test_plugin_count(self):
        """Test plugin_count method returns correct count."""
        pm = PluginManager()
        assert pm.plugin_count() == 0
        pm.register_plugin(MockScorerPlugin())
        assert pm.plugin_count() == 1
        pm.register_plugin(MockFillerPlugin(MockDataGenerator.vocab()))
        assert pm.plugin_count() == 2

    def test_list_plugins_returns_tuple(self):
        """Test that list_plugins returns an immutable tuple."""
        pm = PluginManager()
        pm.register_plugin(MockScorerPlugin(), name="scoring")
        plugins = pm.list_plugins()
        assert isinstance(plugins, tuple)
        assert plugins[0][1] == "scoring"


class TestDispatch:
    """Test hook dispatch through the manager."""

    def test_score_tokens(self):
        """Test scoring goes through the registered plugin."""
        pm = PluginManager()
        pm.register_plugin(MockScorerPlugin())
        s = MockDataGenerator.sequence()
        (scores,) = pm.score_tokens([s])
        assert isinstance(scores, ScoreVector)
        assert scores.scores == mock_score(s)

    def test_empty_batch_skips_plugins(self):
        """Test an empty batch returns without calling any plugin."""
        pm = PluginManager()
        plugin = MockScorerPlugin()
        pm.register_plugin(plugin)
        assert pm.score_tokens([]) == []
        assert plugin.calls == 0

    def test_missing_plugin_raises(self):
        """Test an unanswered hook raises NoPluginError."""
        pm = PluginManager()
        with pytest.raises(NoPluginError):
            pm.score_tokens([MockDataGenerator.sequence()])

    def test_misaligned_answer_raises(self):
        """Test a plugin returning the wrong number of results is a contract error."""
        pm = PluginManager()
        pm.register_plugin(EmptyAnswerPlugin())
        with pytest.raises(ContractError):
            pm.score_tokens([MockDataGenerator.sequence()])

    def test_later_registration_wins(self):
        """Test the most recently registered implementation answers first."""
        pm = PluginManager()
        first, second = MockScorerPlugin(), MockScorerPlugin()
        pm.register_plugin(first)
        pm.register_plugin(second)
        pm.score_tokens([MockDataGenerator.sequence()])
        assert second.calls == 1
        assert first.calls == 0

    def test_fill_skips_unmasked_sentences(self):
        """Test sentences without masks are returned as-is and not counted."""
        pm = PluginManager()
        pm.register_plugin(MockFillerPlugin(MockDataGenerator.vocab()))
        s = MockDataGenerator.sequence()
        masked = MockDataGenerator.masked(s, [0])
        out = pm.fill_masks([s, masked])
        assert out[0] is s
        assert out[1].mask_positions() == []
        assert pm.passes["fill"] == 1

    def test_policy_spans(self):
        """Test policy logits come back one per sentence."""
        pm = PluginManager()
        pm.register_plugin(MockPolicyPlugin(0, 1))
        assert len(pm.policy_spans([MockDataGenerator.sequence()] * 3)) == 3


class TestPassCounting:
    """Test forward-pass accounting."""

    def test_passes_counted_per_sentence(self):
        """Test each scored sentence counts as one pass."""
        pm = PluginManager()
        pm.register_plugin(MockScorerPlugin())
        s = MockDataGenerator.sequence()
        pm.score_tokens([s, s, s])
        pm.score_tokens([s])
        assert pm.passes["score"] == 4

    def test_reset_passes(self):
        """Test reset returns the counts and starts over."""
        pm = PluginManager()
        pm.register_plugin(MockScorerPlugin())
        pm.score_tokens([MockDataGenerator.sequence()])
        assert pm.reset_passes() == {"score": 1}
        assert pm.reset_passes() == {}

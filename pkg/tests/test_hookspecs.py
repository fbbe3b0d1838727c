"""
Tests for AMTL Hook Specifications

Tests that validate hook specifications and their implementations.
"""

import pluggy
import pytest

from amtl.hookspecs import HookSpecs
from amtl.models import PolicyOutput, ScoreVector, TokenSeq
from tests.mock_data import MockFillerPlugin, MockPolicyPlugin, MockScorerPlugin
from tests.mock_data.mock_generator import MockDataGenerator

HOOKS = [
    "amtl_score_tokens",
    "amtl_fill_masks",
    "amtl_mask_distributions",
    "amtl_policy_spans",
]


def _raw_manager(*plugins) -> pluggy.PluginManager:
    pm = pluggy.PluginManager("amtl")
    pm.add_hookspecs(HookSpecs)
    for plugin in plugins:
        pm.register(plugin)
    return pm


class TestHookSpecs:
    """Test hook specifications are properly defined."""

    @pytest.mark.parametrize("hook", HOOKS)
    def test_hookspec_exists(self, hook):
        """Test every correction hook is declared."""
        assert hasattr(HookSpecs, hook)

    @pytest.mark.parametrize("hook", HOOKS)
    def test_hooks_are_firstresult(self, hook):
        """Test every hook returns a single answer rather than a list of them."""
        pm = _raw_manager()
        assert getattr(pm.hook, hook).spec.opts["firstresult"] is True


class TestHookImplementations:
    """Test mock plugins satisfy the hook contracts through raw Pluggy."""

    def test_score_hook(self):
        """Test the scoring hook returns one vector per sentence."""
        pm = _raw_manager(MockScorerPlugin())
        s = MockDataGenerator.sequence()
        result = pm.hook.amtl_score_tokens(sequences=[s, s])
        assert len(result) == 2
        assert all(isinstance(v, ScoreVector) and len(v) == s.k for v in result)

    def test_fill_hook(self):
        """Test the fill hook removes every mask."""
        pm = _raw_manager(MockFillerPlugin(MockDataGenerator.vocab()))
        masked = MockDataGenerator.masked(MockDataGenerator.sequence(), [1, 2])
        (filled,) = pm.hook.amtl_fill_masks(sequences=[masked], strategy="simultaneous")
        assert isinstance(filled, TokenSeq)
        assert filled.mask_positions() == []

    def test_policy_hook(self):
        """Test the policy hook returns aligned logits."""
        pm = _raw_manager(MockPolicyPlugin(1, 2))
        (out,) = pm.hook.amtl_policy_spans(sequences=[MockDataGenerator.sequence()])
        assert isinstance(out, PolicyOutput)
        assert len(out.x_s) == len(out.x_e) == MockDataGenerator.sequence().k

    def test_unanswered_hook_returns_none(self):
        """Test a firstresult hook with no implementation yields None."""
        pm = _raw_manager()
        assert pm.hook.amtl_score_tokens(sequences=[]) is None

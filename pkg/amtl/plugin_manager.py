"""
AMTL Plugin Manager

Registers language-model plugins via Pluggy and dispatches the correction
hooks. Keeps a per-hook count of sentence forward passes so callers can
compare the full search with the policy-guided path.
"""

from collections import Counter
from typing import Dict, List, Optional, Sequence

import pluggy

from amtl.errors import ContractError, NoPluginError
from amtl.hookspecs import HookSpecs
from amtl.models import CandidateDistribution, PolicyOutput, ScoreVector, TokenSeq


class PluginManager:
    """
    Central plugin manager for AMTL.

    Hooks are first-result and Pluggy calls the most recently registered
    implementation first, so a plugin registered later overrides the default.
    """

    def __init__(self):
        self.pm = pluggy.PluginManager("amtl")
        self.pm.add_hookspecs(HookSpecs)
        self._registered_plugins = []
        self.passes: Counter = Counter()

    def register_plugin(self, plugin: object, name: Optional[str] = None) -> None:
        """
        Register a plugin with the manager.

        Args:
            plugin: Plugin instance implementing one or more hookspecs
            name: Optional plugin name for tracking
        """
        self.pm.register(plugin, name=name)
        self._registered_plugins.append((plugin, name))

    def unregister_plugin(self, plugin: object) -> None:
        """
        Unregister a plugin from the manager.

        Args:
            plugin: Plugin instance to unregister
        """
        self.pm.unregister(plugin)
        self._registered_plugins = [(p, n) for p, n in self._registered_plugins if p != plugin]

    def _answer(self, hook: str, result, sequences: Sequence[TokenSeq]):
        if result is None:
            raise NoPluginError(f"no plugin answered {hook}")
        if len(result) != len(sequences):
            raise ContractError(
                f"{hook} returned {len(result)} results for {len(sequences)} sentences"
            )
        return list(result)

    def score_tokens(self, sequences: Sequence[TokenSeq]) -> List[ScoreVector]:
        """
        Score sentences via the scoring plugin.

        Args:
            sequences: Sentences to score

        Returns:
            One ScoreVector per sentence

        Raises:
            NoPluginError: If no registered plugin implements scoring
        """
        if not sequences:
            return []
        result = self.pm.hook.amtl_score_tokens(sequences=list(sequences))
        self.passes["score"] += len(sequences)
        return self._answer("amtl_score_tokens", result, sequences)

    def fill_masks(
        self, sequences: Sequence[TokenSeq], strategy: str = "simultaneous"
    ) -> List[TokenSeq]:
        """
        Fill MASK tokens via the filling plugin.

        Sentences without masks are returned as-is and never reach a plugin.
        """
        out = list(sequences)
        needing = [i for i, s in enumerate(sequences) if s.mask_positions()]
        if not needing:
            return out
        batch = [sequences[i] for i in needing]
        result = self.pm.hook.amtl_fill_masks(sequences=batch, strategy=strategy)
        self.passes["fill"] += len(batch)
        for i, filled in zip(needing, self._answer("amtl_fill_masks", result, batch)):
            out[i] = filled
        return out

    def mask_distributions(
        self, sequences: Sequence[TokenSeq], positions: Sequence[Sequence[int]]
    ) -> List[List[CandidateDistribution]]:
        """Ranked masked-LM candidates at the requested positions."""
        if not sequences:
            return []
        result = self.pm.hook.amtl_mask_distributions(
            sequences=list(sequences), positions=[list(p) for p in positions]
        )
        self.passes["distribution"] += len(sequences)
        return self._answer("amtl_mask_distributions", result, sequences)

    def policy_spans(self, sequences: Sequence[TokenSeq]) -> List[PolicyOutput]:
        """Start and end logits via the policy plugin."""
        if not sequences:
            return []
        result = self.pm.hook.amtl_policy_spans(sequences=list(sequences))
        self.passes["policy"] += len(sequences)
        return self._answer("amtl_policy_spans", result, sequences)

    def max_tokens(self) -> Optional[int]:
        """
        Tightest sentence length the registered plugins accept.

        Plugins declare a limit through a ``max_tokens`` attribute; ``None``
        when none does.
        """
        limits = [
            p.max_tokens for p, _ in self._registered_plugins if getattr(p, "max_tokens", None)
        ]
        return min(limits) if limits else None

    def reset_passes(self) -> Dict[str, int]:
        """Return the pass counts so far and start counting from zero."""
        counts = dict(self.passes)
        self.passes.clear()
        return counts

    def list_plugins(self) -> tuple:
        """
        Return immutable view of registered plugins.

        Returns:
            Tuple of (plugin, name) pairs for all registered plugins
        """
        return tuple(self._registered_plugins)

    def plugin_count(self) -> int:
        """Return count of registered plugins."""
        return len(self._registered_plugins)

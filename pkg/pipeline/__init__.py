"""
Model-backed Pipeline Plugins

One plugin per role: scoring, filling and span prediction. Each answers the
corresponding AMTL hook using a trained AMTLModel.
"""

from typing import Optional

from amtl.network import AMTLModel
from amtl.plugin_manager import PluginManager
from pipeline.filling import FillingPlugin
from pipeline.policy import PolicyPlugin
from pipeline.scoring import ScoringPlugin

__all__ = [
    "ScoringPlugin",
    "FillingPlugin",
    "PolicyPlugin",
    "build_plugin_manager",
]


def build_plugin_manager(
    model: AMTLModel, policy_model: Optional[AMTLModel] = None
) -> PluginManager:
    """
    Plugin manager wired to one model for scoring and filling.

    Args:
        model: Model answering the scoring and masked-LM hooks
        policy_model: Model answering the policy hook (``model`` when omitted)
    """
    pm = PluginManager()
    pm.register_plugin(ScoringPlugin(model), name="scoring")
    pm.register_plugin(FillingPlugin(model), name="filling")
    pm.register_plugin(PolicyPlugin(policy_model or model), name="policy")
    return pm

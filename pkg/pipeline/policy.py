"""
Policy Pipeline

Answers ``amtl_policy_spans`` with the policy head of a trained model. The
policy model may be a different checkpoint from the one scoring and filling.
"""

from typing import List

import pluggy

from amtl.models import PolicyOutput, TokenSeq
from amtl.network import AMTLModel

hookimpl = pluggy.HookimplMarker("amtl")


class PolicyPlugin:
    """Span predictor backed by ``AMTLModel.policy_start`` / ``policy_end``."""

    def __init__(self, model: AMTLModel):
        self.model = model

    @property
    def max_tokens(self) -> int:
        return self.model.max_tokens

    @hookimpl
    def amtl_policy_spans(self, sequences: List[TokenSeq]) -> List[PolicyOutput]:
        return self.model.policy_batch(sequences)

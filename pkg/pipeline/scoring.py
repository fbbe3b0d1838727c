"""
Scoring Pipeline

Answers ``amtl_score_tokens`` with the scoring head of a trained model.
Separate from filling - the search never mixes the two roles.
"""

from typing import List

import pluggy

from amtl.errors import AMTLError
from amtl.models import ScoreVector, TokenSeq
from amtl.network import AMTLModel

hookimpl = pluggy.HookimplMarker("amtl")


class ScoringPlugin:
    """Scoring language model backed by ``AMTLModel.score_head``."""

    def __init__(self, model: AMTLModel):
        self.model = model

    @property
    def max_tokens(self) -> int:
        return self.model.max_tokens

    @hookimpl
    def amtl_score_tokens(self, sequences: List[TokenSeq]) -> List[ScoreVector]:
        """
        Score every position of every sentence in one batched pass.

        Args:
            sequences: Nonempty sentences

        Returns:
            Wrongness probabilities per sentence

        Raises:
            RuntimeError: If the model fails for a reason outside the AMTL contracts
        """
        try:
            return self.model.score_batch(sequences)
        except AMTLError:
            raise
        except Exception as e:
            raise RuntimeError(
                f"Failed to score {len(sequences)} sentences: {type(e).__name__}"
            ) from e

"""
Filling Pipeline

Answers the masked-LM hooks with the MLM head of a trained model.
"""

from typing import List

import pluggy

from amtl.errors import AMTLError, ContractError
from amtl.models import CandidateDistribution, TokenSeq
from amtl.network import AMTLModel

hookimpl = pluggy.HookimplMarker("amtl")

STRATEGIES = ("simultaneous", "iterative")


class FillingPlugin:
    """Masked language model backed by ``AMTLModel.mlm_head``."""

    def __init__(self, model: AMTLModel):
        self.model = model

    @property
    def max_tokens(self) -> int:
        return self.model.max_tokens

    def _iterative(self, sequences: List[TokenSeq]) -> List[TokenSeq]:
        # One pass per round fills the leftmost remaining mask of every sentence.
        current = list(sequences)
        while True:
            pending = [i for i, s in enumerate(current) if s.mask_positions()]
            if not pending:
                return current
            batch = [current[i] for i in pending]
            firsts = [s.mask_positions()[0] for s in batch]
            dists = self.model.mlm_distributions(batch, [[p] for p in firsts])
            for i, p, row in zip(pending, firsts, dists):
                current[i] = current[i].replace_span(p, p + 1, (row[0].ranked_ids[0],))

    @hookimpl
    def amtl_fill_masks(self, sequences: List[TokenSeq], strategy: str) -> List[TokenSeq]:
        """
        Fill MASK tokens with argmax candidates.

        Raises:
            ContractError: For an unknown strategy
            RuntimeError: If the model fails for a reason outside the AMTL contracts
        """
        if strategy not in STRATEGIES:
            raise ContractError(f"unknown fill strategy {strategy!r}")
        try:
            if strategy == "iterative":
                return self._iterative(sequences)
            return self.model.fill(sequences)
        except AMTLError:
            raise
        except Exception as e:
            raise RuntimeError(
                f"Failed to fill {len(sequences)} sentences: {type(e).__name__}"
            ) from e

    @hookimpl
    def amtl_mask_distributions(
        self, sequences: List[TokenSeq], positions: List[List[int]]
    ) -> List[List[CandidateDistribution]]:
        """Ranked candidates at each requested masked position."""
        return self.model.mlm_distributions(sequences, positions)

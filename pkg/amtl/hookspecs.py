"""
AMTL Plugin Hook Specifications

Pluggy hook specifications for the correction pipeline. The search never
touches a network directly: it asks whichever plugin answers these hooks to
score, fill and locate. Every hook takes a batch of sentences and is
``firstresult``: the most recently registered plugin that answers wins.
"""

from typing import List

import pluggy

from amtl.models import CandidateDistribution, PolicyOutput, ScoreVector, TokenSeq

hookspec = pluggy.HookspecMarker("amtl")


class HookSpecs:
    """Hook specifications container."""

    @hookspec(firstresult=True)
    def amtl_score_tokens(sequences: List[TokenSeq]) -> List[ScoreVector]:
        """
        Scoring language model: per-token wrongness of each sentence.

        Args:
            sequences: Sentences without MASK tokens, each nonempty

        Returns:
            One ScoreVector per sentence, aligned with ``sequences``
        """

    @hookspec(firstresult=True)
    def amtl_fill_masks(sequences: List[TokenSeq], strategy: str) -> List[TokenSeq]:
        """
        Masked language model: replace every MASK with a content token.

        Args:
            sequences: Sentences with zero or more contiguous MASK tokens
            strategy: ``"simultaneous"`` (one pass, independent argmax) or
                ``"iterative"`` (left to right, one mask per pass)

        Returns:
            Filled sentences; a sentence without masks comes back unchanged
        """

    @hookspec(firstresult=True)
    def amtl_mask_distributions(
        sequences: List[TokenSeq], positions: List[List[int]]
    ) -> List[List[CandidateDistribution]]:
        """
        Masked language model: ranked candidates at the given masked positions.

        Args:
            sequences: Sentences containing MASK tokens
            positions: Per sentence, the masked positions to report

        Returns:
            Per sentence, one CandidateDistribution per requested position
        """

    @hookspec(firstresult=True)
    def amtl_policy_spans(sequences: List[TokenSeq]) -> List[PolicyOutput]:
        """
        Policy network: start and end logits over positions.

        Args:
            sequences: Nonempty sentences

        Returns:
            One PolicyOutput per sentence
        """

"""
BigramLM Plugin

A count-based character bigram model that answers the scoring and masked-LM
hooks. It needs no training beyond counting, so it serves as a cheap
baseline for the search and as a deterministic model in tests.

Usage:
    from amtl import PluginManager
    from amtl.plugins.bigram_lm import BigramLMPlugin

    pm = PluginManager()
    pm.register_plugin(BigramLMPlugin.fit(corpus, vocab), name="bigram_lm")
    scores = pm.score_tokens([sentence])
"""

from typing import List, Sequence

import numpy as np
import pluggy

from amtl.errors import ContractError, EmptyCorpusError
from amtl.models import (
    BOS_ID,
    EOS_ID,
    MASK_ID,
    N_SPECIALS,
    CandidateDistribution,
    ScoreVector,
    TokenSeq,
)
from amtl.vocab import Vocab

hookimpl = pluggy.HookimplMarker("amtl")


class BigramLMPlugin:
    """
    Scores and fills with add-alpha smoothed bigram probabilities.

    Scoring: the wrongness of position i is ``1 - sqrt(p(x_i | x_{i-1}) *
    p(x_{i+1} | x_i))`` with BOS and EOS at the edges, so a character that
    fits neither neighbour scores close to 1.

    Filling: masks are filled left to right; each takes the content character
    maximising ``p(c | left) * p(right | c)``, ignoring ``right`` while it is
    still masked.
    """

    def __init__(self, transitions: np.ndarray, vocab: Vocab):
        """
        Args:
            transitions: (vs, vs) row-stochastic matrix, ``[a, b] = p(b | a)``
            vocab: Vocabulary the ids refer to
        """
        if transitions.shape != (vocab.vs, vocab.vs):
            raise ContractError("transition matrix does not match the vocabulary")
        self.transitions = transitions
        self.vocab = vocab

    @classmethod
    def fit(cls, corpus: Sequence[TokenSeq], vocab: Vocab, alpha: float = 0.1) -> "BigramLMPlugin":
        """
        Count bigrams over ``[BOS] s [EOS]`` for every sentence.

        Raises:
            EmptyCorpusError: If ``corpus`` is empty
        """
        if not corpus:
            raise EmptyCorpusError("cannot fit a bigram model on an empty corpus")
        counts = np.zeros((vocab.vs, vocab.vs))
        for s in corpus:
            ids = (BOS_ID,) + s.ids + (EOS_ID,)
            np.add.at(counts, (ids[:-1], ids[1:]), 1.0)
        # Only content characters and EOS can follow anything.
        support = np.zeros(vocab.vs)
        support[N_SPECIALS:] = 1.0
        support[EOS_ID] = 1.0
        smoothed = (counts + alpha) * support
        return cls(smoothed / smoothed.sum(axis=1, keepdims=True), vocab)

    def _p(self, a: int, b: int) -> float:
        return float(self.transitions[a, b])

    def _scores(self, s: TokenSeq) -> List[float]:
        ids = (BOS_ID,) + s.ids + (EOS_ID,)
        return [
            1.0 - float(np.sqrt(self._p(ids[i - 1], ids[i]) * self._p(ids[i], ids[i + 1])))
            for i in range(1, len(ids) - 1)
        ]

    def _candidates(self, ids: Sequence[int], p: int) -> np.ndarray:
        """Unnormalised weight of each content character at position p of ``ids``."""
        left = ids[p - 1] if p > 0 else BOS_ID
        right = ids[p + 1] if p + 1 < len(ids) else EOS_ID
        weights = self.transitions[left, N_SPECIALS:].copy()
        if right != MASK_ID:
            weights *= self.transitions[N_SPECIALS:, right]
        return weights

    @hookimpl
    def amtl_score_tokens(self, sequences: List[TokenSeq]) -> List[ScoreVector]:
        if any(s.k == 0 for s in sequences):
            raise ContractError("cannot score an empty sentence")
        return [ScoreVector(scores=self._scores(s)) for s in sequences]

    @hookimpl
    def amtl_fill_masks(self, sequences: List[TokenSeq], strategy: str) -> List[TokenSeq]:
        filled = []
        for s in sequences:
            ids = list(s.ids)
            for p in s.mask_positions():
                ids[p] = int(np.argmax(self._candidates(ids, p))) + N_SPECIALS
            filled.append(TokenSeq(ids=tuple(ids)))
        return filled

    @hookimpl
    def amtl_mask_distributions(
        self, sequences: List[TokenSeq], positions: List[List[int]]
    ) -> List[List[CandidateDistribution]]:
        out = []
        for s, wanted in zip(sequences, positions):
            row = []
            for p in wanted:
                if s.ids[p] != MASK_ID:
                    raise ContractError(f"position {p} is not masked")
                weights = self._candidates(s.ids, p)
                dist = weights / weights.sum()
                order = np.argsort(-dist, kind="stable")
                row.append(
                    CandidateDistribution(
                        position=p,
                        ranked_ids=[int(j) + N_SPECIALS for j in order],
                        d=[float(v) for v in dist[order]],
                    )
                )
            out.append(row)
        return out

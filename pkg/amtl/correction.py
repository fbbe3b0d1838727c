"""
AMTL Corrector

Scoring-guided span search. The scoring model picks the most suspicious
position; every span around it (up to ``width`` on each side) is masked with
0..``depth`` MASK tokens, refilled by the masked LM and rescored. The filled
sentence with the lowest mean wrongness wins.

The fast path asks the policy model for the span instead and only varies the
number of masks.

All model access goes through a PluginManager, so any plugin answering the
scoring and filling hooks can drive the search.
"""

import logging
import math
from typing import List, Sequence, Tuple

import numpy as np

from amtl.config import CorrectorConfig
from amtl.errors import ContractError
from amtl.models import CandidateEdit, PolicyOutput, ScoreVector, SearchTrace, TokenSeq
from amtl.plugin_manager import PluginManager
from amtl.tensor import soft_argmax

logger = logging.getLogger(__name__)

Triple = Tuple[int, int, int]


def detect_peak(scores: ScoreVector | Sequence[float]) -> int:
    """
    Position of the highest wrongness score; ties go to the lowest index.

    Raises:
        ContractError: If there are no scores
    """
    values = scores.scores if isinstance(scores, ScoreVector) else list(scores)
    if not values:
        raise ContractError("cannot pick a peak from an empty score vector")
    return int(np.argmax(values))


def enumerate_candidates(k: int, p_m: int, cfg: CorrectorConfig) -> List[Triple]:
    """
    All ``(p_s, p_e, num)`` triples around the peak ``p_m``.

    ``p_s`` runs over ``[max(0, p_m - width), p_m]``, ``p_e`` over
    ``[p_m + 1, min(k, p_m + 1 + width)]`` (half-open ends) and ``num`` over
    ``[0, depth]``. The identity ``(p_m, p_m, 0)`` is appended when
    ``include_identity`` is set.
    """
    if not 0 <= p_m < k:
        raise ContractError(f"peak {p_m} outside sentence of length {k}")
    triples = [
        (p_s, p_e, num)
        for p_s in range(max(0, p_m - cfg.width), p_m + 1)
        for p_e in range(p_m + 1, min(k, p_m + 1 + cfg.width) + 1)
        for num in range(cfg.depth + 1)
    ]
    if cfg.include_identity:
        triples.append((p_m, p_m, 0))
    return triples


def span_candidates(p_s: int, p_e: int, cfg: CorrectorConfig) -> List[Triple]:
    """Triples for a fixed span: every ``num`` plus the identity when enabled."""
    triples = [(p_s, p_e, num) for num in range(cfg.depth + 1)]
    if cfg.include_identity:
        triples.append((p_s, p_s, 0))
    return triples


def viable(k: int, triples: Sequence[Triple], max_tokens: int) -> List[Triple]:
    """Drop triples whose filled sentence would be empty or longer than ``max_tokens``."""
    return [t for t in triples if 0 < k - (t[1] - t[0]) + t[2] <= max_tokens]


def round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def predicted_span(out: PolicyOutput) -> Tuple[int, int]:
    """
    Half-open span from policy logits.

    Both soft-argmax positions are rounded half up; the end is inclusive. A
    predicted end before the start is swapped and widened by one.
    """
    k = len(out.x_s)
    start = round_half_up(soft_argmax(np.asarray(out.x_s)).item())
    end = round_half_up(soft_argmax(np.asarray(out.x_e)).item())
    if end < start:
        logger.info("swapped degenerate policy span", extra={"start": start, "end": end})
        start, end = end, min(start + 1, k - 1)
    return start, end + 1


def norm_score(scores: ScoreVector) -> float:
    """Mean wrongness over the filled sentence."""
    return float(sum(scores.scores) / len(scores.scores))


def fill_masks(s: TokenSeq, pm: PluginManager, strategy: str = "simultaneous") -> TokenSeq:
    """Fill the MASK tokens of one sentence; unchanged when it has none."""
    return pm.fill_masks([s], strategy)[0]


class Corrector:
    """
    Runs the correction search against the models registered in ``pm``.

    Args:
        pm: Plugin manager answering scoring and filling (and policy, for
            the fast path)
        cfg: Search width, depth and identity handling
    """

    def __init__(self, pm: PluginManager, cfg: CorrectorConfig | None = None):
        self.pm = pm
        self.cfg = cfg or CorrectorConfig()

    @property
    def max_tokens(self) -> int:
        """``cfg.max_tokens`` clamped to what the registered models can frame."""
        limit = self.pm.max_tokens()
        return self.cfg.max_tokens if limit is None else min(self.cfg.max_tokens, limit)

    def evaluate(self, s: TokenSeq, triples: Sequence[Triple]) -> List[CandidateEdit]:
        """Mask, fill and rescore every triple in one batch each."""
        masked = [s.mask_span(p_s, p_e, num) for p_s, p_e, num in triples]
        filled = self.pm.fill_masks(masked, self.cfg.refill)
        scores = self.pm.score_tokens(filled)
        return [
            CandidateEdit(
                p_s=p_s,
                p_e=p_e,
                num=num,
                source_k=s.k,
                filled=f,
                norm_score=norm_score(sv),
            )
            for (p_s, p_e, num), f, sv in zip(triples, filled, scores)
        ]

    def _select(
        self, s: TokenSeq, triples: List[Triple], seed_span: Tuple[int, int]
    ) -> SearchTrace:
        triples = viable(s.k, triples, self.max_tokens)
        if not triples:
            raise ContractError(f"no viable candidate for a sentence of length {s.k}")
        candidates = self.evaluate(s, triples)
        best = min(candidates, key=CandidateEdit.sort_key)
        return SearchTrace(
            source=s,
            best=best,
            candidates=candidates,
            seed_span=seed_span,
            passes={"seed": 1, "score": len(candidates)},
        )

    def search(self, s: TokenSeq) -> SearchTrace:
        """
        Full search: score, pick the peak, evaluate every candidate.

        Raises:
            ContractError: If ``s`` is empty
        """
        if s.k == 0:
            raise ContractError("cannot correct an empty sentence")
        p_m = detect_peak(self.pm.score_tokens([s])[0])
        return self._select(s, enumerate_candidates(s.k, p_m, self.cfg), (p_m, p_m + 1))

    def search_fast(self, s: TokenSeq) -> SearchTrace:
        """Policy-guided search: the predicted span replaces the peak sweep."""
        if s.k == 0:
            raise ContractError("cannot correct an empty sentence")
        p_s, p_e = predicted_span(self.pm.policy_spans([s])[0])
        return self._select(s, span_candidates(p_s, p_e, self.cfg), (p_s, p_e))

    def correct(self, s: TokenSeq) -> TokenSeq:
        return self.search(s).best.filled

    def correct_fast(self, s: TokenSeq) -> TokenSeq:
        return self.search_fast(s).best.filled

    def trace_rounds(
        self, s: TokenSeq, rounds: int | None = None, fast: bool = False
    ) -> List[SearchTrace]:
        """
        Repeat the search on its own output until it stops changing.

        Each round fixes at most one span, so several rounds can repair
        sentences with more than one error.

        Returns:
            One trace per round run; the last one holds the final sentence
        """
        rounds = rounds or self.cfg.rounds
        traces: List[SearchTrace] = []
        current = s
        for i in range(rounds):
            trace = self.search_fast(current) if fast else self.search(current)
            traces.append(trace)
            if trace.best.filled == current:
                logger.debug("correction converged", extra={"round": i + 1})
                break
            current = trace.best.filled
        return traces

    def correct_iterative(
        self, s: TokenSeq, rounds: int | None = None, fast: bool = False
    ) -> TokenSeq:
        return self.trace_rounds(s, rounds, fast)[-1].best.filled


def explain(trace: SearchTrace) -> str:
    """``p_s,p_e,num,norm_score`` of the chosen edit, for the explain column."""
    best = trace.best
    return f"{best.p_s},{best.p_e},{best.num},{best.norm_score:.6f}"

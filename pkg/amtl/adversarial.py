"""
Adversarially generated training data and the interlaced weights.

The generator (masked LM) proposes a ranked candidate list at each masked
position; a log-uniform rank picks which candidate replaces the original.
Ranks below ``pos_threshold`` count as reasonable (correct) replacements.
The generator's confidences weight the discriminator (W_G) and the
discriminator's scores weight the generator (W_D).
"""

import logging
import math
from typing import List, Sequence

import numpy as np

from amtl.config import TrainConfig
from amtl.errors import ContractError, DegenerateConfidenceError
from amtl.models import MASK_ID, AdversarialBatch, CandidateDistribution, ScoreVector, TokenSeq
from amtl.network import AMTLModel
from amtl.vocab import Vocab

logger = logging.getLogger(__name__)

CONFIDENCE_FLOOR = 1e-9
# exp(ln Ct) can land a hair under Ct in floating point.
_ROUNDING_SLACK = 1e-9


def rank_from_uniform(u: float, ct: float) -> int:
    """``floor(e^{u ln Ct})`` clamped to ``[1, Ct]``."""
    rank = math.floor(math.exp(u * math.log(ct)) + _ROUNDING_SLACK)
    return int(min(max(rank, 1), math.floor(ct)))


def sample_candidate_rank(rng: np.random.Generator, ct: float) -> int:
    """
    Draw a log-uniform rank in ``[1, Ct]``.

    ``P(rank < r) = ln r / ln Ct``, so with Ct=1000 about 43% of draws fall
    below 20.
    """
    return rank_from_uniform(float(rng.random()), ct)


def candidate_index(rank: int, n_candidates: int, ct: float) -> int:
    """
    Map a rank in ``[1, Ct]`` onto a 0-based index into a candidate list.

    When the list is at least Ct long the rank is used directly. Otherwise
    the rank is projected on a log scale, ``floor(n^(ln rank / ln Ct)) - 1``,
    so rank 1 stays the top candidate and rank Ct becomes the last.
    """
    if n_candidates < 1:
        raise ContractError("empty candidate list")
    if ct <= n_candidates:
        return min(rank, n_candidates) - 1
    scaled = math.floor(n_candidates ** (math.log(rank) / math.log(ct)) + _ROUNDING_SLACK)
    return min(max(scaled, 1), n_candidates) - 1


def similarity_offset(d: CandidateDistribution, index: int, s_g: float) -> float:
    """``s = (d[0] - d[index]) / d[index] - S_g``."""
    if not 0 <= index < len(d.d):
        raise ContractError(f"candidate index {index} outside distribution of {len(d.d)}")
    dr = d.d[index]
    if dr == 0.0:
        raise DegenerateConfidenceError(f"zero confidence at candidate {index}")
    return (d.d[0] - dr) / max(dr, CONFIDENCE_FLOOR) - s_g


def interlaced_weight_G(
    d: CandidateDistribution, index: int, s_g: float, clamp_nonneg: bool = False
) -> float:
    """
    Generator-to-discriminator weight of one generated token.

    ``sigmoid(s) + 0.5`` when ``s >= 0``, ``tanh(s)`` otherwise; the result
    lies in ``(-1, 1.5]``.

    Args:
        d: Candidate distribution at the generated position
        index: 0-based candidate the generated token was taken from
        s_g: Similarity offset
        clamp_nonneg: Clamp negative weights to 0

    Raises:
        DegenerateConfidenceError: If ``d[index]`` is exactly zero
    """
    s = similarity_offset(d, index, s_g)
    weight = 1.0 / (1.0 + math.exp(-s)) + 0.5 if s >= 0 else math.tanh(s)
    return max(weight, 0.0) if clamp_nonneg else weight


def interlaced_weight_D(score_g: ScoreVector, score_o: ScoreVector, i: int) -> float:
    """
    Discriminator-to-generator weight at position i: ``score_g[i] / score_o[i]``.

    Raises:
        ContractError: If the score vectors differ in length
    """
    if len(score_g) != len(score_o):
        raise ContractError(f"score lengths differ: {len(score_g)} vs {len(score_o)}")
    return score_g.scores[i] / max(score_o.scores[i], CONFIDENCE_FLOOR)


def interlaced_weights_D(score_g: np.ndarray, score_o: np.ndarray) -> np.ndarray:
    """Vectorised ``interlaced_weight_D`` over aligned probability arrays."""
    if score_g.shape != score_o.shape:
        raise ContractError(f"score shapes differ: {score_g.shape} vs {score_o.shape}")
    return score_g / np.maximum(score_o, CONFIDENCE_FLOOR)


_BATCH_FIELDS = ("sentences", "generated", "original", "labels", "ranks", "original_ids", "w_g")


def _masked(s: TokenSeq, positions: Sequence[int]) -> TokenSeq:
    ids = list(s.ids)
    for p in positions:
        ids[p] = MASK_ID
    return TokenSeq(ids=tuple(ids))


def _mask_positions(rng: np.random.Generator, k: int, ratio: float) -> List[int]:
    n_mask = min(k, max(1, int(round(ratio * k))))
    return sorted(int(p) for p in rng.choice(k, size=n_mask, replace=False))


def build_adversarial_batch(
    sentences: Sequence[TokenSeq],
    model: AMTLModel,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> AdversarialBatch:
    """
    Mask, then fill each masked position with the generator's candidate at a
    sampled rank.

    One masked-LM pass covers the whole batch. Labels are 1 (wrong) for
    generated tokens ranked at or beyond ``pos_threshold`` and 0 elsewhere;
    a generated token equal to the original is labelled correct when
    ``cfg.label_identity_correct`` is set.

    Sentences with no maskable position are dropped and counted in
    ``skipped``.
    """
    kept = [s for s in sentences if s.k > 0]
    skipped = len(sentences) - len(kept)
    if skipped:
        logger.warning("skipped sentences without maskable positions", extra={"skipped": skipped})

    positions = [_mask_positions(rng, s.k, cfg.mask_ratio) for s in kept]
    masked = [_masked(s, p) for s, p in zip(kept, positions)]
    dists = model.mlm_distributions(masked, positions) if kept else []

    batch = {key: [] for key in _BATCH_FIELDS}
    for s, pos, row in zip(kept, positions, dists):
        ids = list(s.ids)
        labels = [0] * s.k
        w_g = [1.0] * s.k
        ranks, truth = [], []
        for p, d in zip(pos, row):
            rank = sample_candidate_rank(rng, cfg.ct)
            index = candidate_index(rank, len(d.ranked_ids), cfg.ct)
            token = d.ranked_ids[index]
            wrong = rank >= cfg.pos_threshold
            if cfg.label_identity_correct and token == s.ids[p]:
                wrong = False
            ids[p] = token
            labels[p] = int(wrong)
            w_g[p] = interlaced_weight_G(d, index, cfg.s_g, cfg.clamp_wg_nonneg)
            ranks.append(rank)
            truth.append(s.ids[p])
        batch["sentences"].append(TokenSeq(ids=tuple(ids)))
        batch["generated"].append(list(pos))
        batch["original"].append([i for i in range(s.k) if i not in set(pos)])
        batch["labels"].append(labels)
        batch["ranks"].append(ranks)
        batch["original_ids"].append(truth)
        batch["w_g"].append(w_g)
    return AdversarialBatch(originals=kept, masked=masked, skipped=skipped, **batch)


def build_random_batch(
    sentences: Sequence[TokenSeq],
    vocab: Vocab,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> AdversarialBatch:
    """
    Replacement data without a generator: masked positions take uniformly
    random content characters.

    This is the data of the normal supervised arm. Every replacement that
    differs from the original is labelled wrong, all weights are 1 and the
    recorded rank is Ct.
    """
    kept = [s for s in sentences if s.k > 0]
    skipped = len(sentences) - len(kept)
    if skipped:
        logger.warning("skipped sentences without maskable positions", extra={"skipped": skipped})
    content = vocab.content_ids
    fields = {key: [] for key in ("masked",) + _BATCH_FIELDS}
    for s in kept:
        pos = _mask_positions(rng, s.k, cfg.mask_ratio)
        ids, masked_ids = list(s.ids), list(s.ids)
        labels = [0] * s.k
        for p in pos:
            ids[p] = int(content[int(rng.integers(len(content)))])
            masked_ids[p] = MASK_ID
            labels[p] = int(ids[p] != s.ids[p])
        fields["masked"].append(TokenSeq(ids=tuple(masked_ids)))
        fields["sentences"].append(TokenSeq(ids=tuple(ids)))
        fields["generated"].append(pos)
        fields["original"].append([i for i in range(s.k) if i not in set(pos)])
        fields["labels"].append(labels)
        fields["ranks"].append([int(math.floor(cfg.ct))] * len(pos))
        fields["original_ids"].append([s.ids[p] for p in pos])
        fields["w_g"].append([1.0] * s.k)
    return AdversarialBatch(originals=kept, skipped=skipped, **fields)

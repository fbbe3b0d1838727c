"""
Evaluation metrics.

Pure functions over scores, predictions and token sequences. The model-based
fluency measures query the masked-LM hook through a PluginManager, masking
one position at a time.
"""

import math
from collections import Counter
from typing import Literal, Sequence, Tuple

import numpy as np

from amtl.errors import ContractError
from amtl.models import MASK_ID, ScoreVector, TokenSeq
from amtl.plugin_manager import PluginManager

PROB_FLOOR = 1e-12


def top_k_positions(scores: Sequence[float], k: int) -> list[int]:
    """Indices of the ``k`` highest scores; ties keep the lower index first."""
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    return [int(i) for i in order[:k]]


def widen_empty(span: Tuple[int, int], length: int) -> Tuple[int, int]:
    """A zero-width span counts the characters on both sides of its gap."""
    start, end = span
    if end > start:
        return span
    return max(0, start - 1), min(length, start + 1)


def detection_hit(
    scores: ScoreVector | Sequence[float], true_span: Tuple[int, int], topk: int
) -> int:
    """
    1 if any of the ``topk`` highest-scoring positions lies in ``true_span``.

    ``topk`` larger than the sentence is clamped to its length.

    Raises:
        ContractError: If ``topk`` is below 1
    """
    values = scores.scores if isinstance(scores, ScoreVector) else list(scores)
    if topk < 1:
        raise ContractError("topk must be at least 1")
    start, end = widen_empty(true_span, len(values))
    return int(any(start <= p < end for p in top_k_positions(values, min(topk, len(values)))))


def detection_accuracy_topk(
    scores: Sequence[ScoreVector | Sequence[float]],
    spans: Sequence[Tuple[int, int]],
    topk: int,
) -> float:
    """Mean ``detection_hit`` over a set of sentences."""
    if len(scores) != len(spans):
        raise ContractError("one true span per score vector")
    if not scores:
        raise ContractError("no sentences to evaluate")
    return float(np.mean([detection_hit(s, span, topk) for s, span in zip(scores, spans)]))


def mlm_metrics(
    predictions: Sequence[int],
    targets: Sequence[int],
    average: Literal["macro", "micro"] = "macro",
) -> Tuple[float, float, float, float]:
    """
    Accuracy, precision, recall and F1 of masked-LM predictions.

    Macro averages over the classes present in ``targets``; a class never
    predicted has precision 0. Micro averaging of single-label predictions
    makes all four equal to accuracy.

    Raises:
        ContractError: If the inputs are empty or misaligned
    """
    if len(predictions) != len(targets):
        raise ContractError("predictions and targets must align")
    if not targets:
        raise ContractError("no predictions to score")
    pred = np.asarray(predictions)
    gold = np.asarray(targets)
    acc = float(np.mean(pred == gold))
    if average == "micro":
        return acc, acc, acc, acc
    precisions, recalls, f1s = [], [], []
    for cls in sorted(set(targets)):
        tp = float(np.sum((pred == cls) & (gold == cls)))
        predicted = float(np.sum(pred == cls))
        support = float(np.sum(gold == cls))
        p = tp / predicted if predicted else 0.0
        r = tp / support
        precisions.append(p)
        recalls.append(r)
        f1s.append(2 * p * r / (p + r) if p + r else 0.0)
    return acc, float(np.mean(precisions)), float(np.mean(recalls)), float(np.mean(f1s))


def _ngrams(seq: Sequence, n: int) -> Counter:
    return Counter(tuple(seq[i : i + n]) for i in range(len(seq) - n + 1))


def bleu(candidate: Sequence, reference: Sequence, max_n: int = 4) -> float:
    """
    Character BLEU of one candidate against one reference.

    Geometric mean of clipped n-gram precisions for n = 1..max_n, with add-one
    smoothing from n = 2, times the brevity penalty.

    Raises:
        ContractError: If the reference is empty
    """
    candidate = candidate.ids if isinstance(candidate, TokenSeq) else candidate
    reference = reference.ids if isinstance(reference, TokenSeq) else reference
    if not reference:
        raise ContractError("reference must be nonempty")
    if not candidate:
        return 0.0
    log_total = 0.0
    for n in range(1, max_n + 1):
        cand, ref = _ngrams(candidate, n), _ngrams(reference, n)
        matched = sum(min(count, ref[gram]) for gram, count in cand.items())
        total = sum(cand.values())
        smooth = 1 if n > 1 else 0
        if matched + smooth == 0:
            return 0.0
        log_total += math.log((matched + smooth) / (total + smooth))
    c, r = len(candidate), len(reference)
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return bp * math.exp(log_total / max_n)


def token_probabilities(s: TokenSeq, pm: PluginManager) -> np.ndarray:
    """
    Probability of each token when it alone is masked (one batched pass).

    Raises:
        ContractError: If ``s`` is empty
    """
    if s.k == 0:
        raise ContractError("cannot measure an empty sentence")
    masked = [s.replace_span(i, i + 1, (MASK_ID,)) for i in range(s.k)]
    dists = pm.mask_distributions(masked, [[i] for i in range(s.k)])
    return np.array([row[0].confidence_of(s.ids[i]) for i, row in enumerate(dists)])


def model_perplexity(s: TokenSeq, pm: PluginManager) -> float:
    """Pseudo-perplexity: ``exp`` of the mean negative log pseudo-likelihood."""
    probs = np.maximum(token_probabilities(s, pm), PROB_FLOOR)
    return float(np.exp(-np.mean(np.log(probs))))


def ppl_ratio(source: TokenSeq, corrected: TokenSeq, pm: PluginManager) -> float:
    """``ppl(source) / ppl(corrected)``; above 1 when the correction reads more fluently."""
    return model_perplexity(source, pm) / model_perplexity(corrected, pm)


def token_prob_ratio(source: TokenSeq, corrected: TokenSeq, pm: PluginManager) -> float:
    """Mean token probability of the correction over that of the source."""
    before = max(float(np.mean(token_probabilities(source, pm))), PROB_FLOOR)
    after = max(float(np.mean(token_probabilities(corrected, pm))), PROB_FLOOR)
    return after / before

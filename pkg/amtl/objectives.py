"""
Training objectives.

All losses are sums over positions, written with the usual negative sign so
they are minimised. Scoring inputs are raw logits; probabilities only appear
inside ``log_sigmoid`` and ``sigmoid`` so saturated logits stay finite.
"""

import logging
from typing import Optional, Sequence

import numpy as np

from amtl.errors import ContractError
from amtl.models import N_SPECIALS
from amtl.tensor import Tensor, as_tensor, log_sigmoid, logsumexp, sigmoid

logger = logging.getLogger(__name__)


def _zero() -> Tensor:
    return Tensor(0.0)


def to_classes(token_ids: Sequence[int]) -> np.ndarray:
    """Content token ids to masked-LM column indices."""
    classes = np.asarray(token_ids, dtype=np.int64) - N_SPECIALS
    if classes.size and classes.min() < 0:
        raise ContractError("masked-LM targets must be content tokens")
    return classes


def cross_entropy(
    logits: Tensor, classes: np.ndarray, weights: Optional[np.ndarray] = None
) -> Tensor:
    """
    ``sum_i w_i * (logsumexp(x_i) - x_i[c_i])`` over rows of ``logits``.

    Args:
        logits: (n, C) scores
        classes: (n,) target column per row
        weights: (n,) per-row weights, 1 when omitted
    """
    classes = np.asarray(classes, dtype=np.int64)
    if logits.shape[0] != classes.shape[0]:
        raise ContractError(f"{logits.shape[0]} logit rows for {classes.shape[0]} targets")
    if classes.size == 0:
        return _zero()
    picked = logits[np.arange(classes.size), classes]
    per_row = logsumexp(logits, axis=-1) - picked
    if weights is not None:
        per_row = per_row * np.asarray(weights, dtype=np.float64)
    return per_row.sum()


def binary_cross_entropy(
    logits: Tensor, labels: np.ndarray, weights: Optional[np.ndarray] = None
) -> Tensor:
    """
    ``-sum_i w_i [y_i ln sigmoid(x_i) + (1 - y_i) ln(1 - sigmoid(x_i))]``.

    Args:
        logits: (n,) raw scores
        labels: (n,) targets, 1 = wrong
        weights: (n,) per-position weights, 1 when omitted
    """
    labels = np.asarray(labels, dtype=np.float64)
    if logits.shape != labels.shape:
        raise ContractError(f"logits {logits.shape} and labels {labels.shape} differ")
    if labels.size == 0:
        return _zero()
    per_pos = labels * log_sigmoid(logits) + (1.0 - labels) * log_sigmoid(-logits)
    if weights is not None:
        per_pos = per_pos * np.asarray(weights, dtype=np.float64)
    return -per_pos.sum()


def loss_generator(logits: Tensor, original_ids: Sequence[int], w_d: np.ndarray) -> Tensor:
    """
    Generator loss: cross-entropy toward the original token at each generated
    position, weighted by the discriminator's W_D.

    Args:
        logits: (|R|, n_content) masked-LM logits at the generated positions
        original_ids: Ground-truth token ids at those positions
        w_d: (|R|,) discriminator-to-generator weights

    Returns:
        Scalar loss; zero when R is empty
    """
    if len(original_ids) == 0:
        logger.info("generator loss on empty R", extra={"generated": 0})
        return _zero()
    return cross_entropy(logits, to_classes(original_ids), np.asarray(w_d, dtype=np.float64))


def loss_discriminator_pair(
    logits: Tensor,
    generated: Sequence[int],
    original: Sequence[int],
    post_sigmoid: bool = False,
) -> Optional[Tensor]:
    """
    Generated-versus-original ratio for one sentence:
    ``sum_{i in C} sigmoid(x_i) / sum_{j in R} sigmoid(x_j)``.

    Args:
        logits: (k,) raw scores of one sentence
        generated: R
        original: C
        post_sigmoid: Treat ``logits`` as probabilities already, so sigmoid
            is applied on top of them

    Returns:
        The ratio, or None when R is empty
    """
    if len(generated) == 0:
        return None
    x = sigmoid(logits) if post_sigmoid else logits
    probs = sigmoid(x)
    if len(original) == 0:
        return _zero()
    num = probs[np.asarray(original, dtype=np.int64)].sum()
    den = probs[np.asarray(generated, dtype=np.int64)].sum()
    return num / den


def loss_discriminator(
    logits: Tensor,
    labels: np.ndarray,
    w_g: np.ndarray,
    generated: Sequence[int],
    original: Sequence[int],
    post_sigmoid: bool = False,
) -> Tensor:
    """
    Discriminator loss of one sentence: W_G-weighted binary cross-entropy
    over all k positions plus the generated-versus-original ratio.

    Args:
        logits: (k,) raw wrongness scores
        labels: (k,) targets, 1 = wrong
        w_g: (k,) weights, 1 at original positions
        generated: R, the generated positions
        original: C, the untouched positions
        post_sigmoid: See ``loss_discriminator_pair``

    Raises:
        ContractError: If R and C overlap or do not cover the sentence
    """
    k = logits.shape[0]
    r, c = set(generated), set(original)
    if r & c or r | c != set(range(k)):
        raise ContractError("R and C must partition the sentence positions")
    weighted = binary_cross_entropy(logits, labels, np.asarray(w_g, dtype=np.float64))
    pair = loss_discriminator_pair(logits, generated, original, post_sigmoid)
    if pair is None:
        logger.info("skipped generated-versus-original term on empty R", extra={"k": k})
        return weighted
    return weighted + pair


def loss_mtl(
    mlm_logits: Tensor,
    mlm_targets: Sequence[int],
    score_logits: Tensor,
    score_labels: np.ndarray,
) -> Tensor:
    """
    Multi-task loss: unweighted scoring BCE plus masked-LM cross-entropy.

    Args:
        mlm_logits: (n_masked, n_content) logits at masked positions
        mlm_targets: Original token ids at those positions
        score_logits: (n,) raw scores over all scored positions
        score_labels: (n,) scoring targets
    """
    if len(mlm_targets) == 0:
        logger.info("masked-LM term is zero without masked positions", extra={"masked": 0})
        ce = _zero()
    else:
        ce = cross_entropy(mlm_logits, to_classes(mlm_targets))
    return binary_cross_entropy(as_tensor(score_logits), score_labels) + ce

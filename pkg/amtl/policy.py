"""
Policy span learner.

Supervision comes from the search itself: each clean sentence is corrupted,
corrected by the full search, and the two differences (wrong vs original,
wrong vs corrected) give a start range, an end range and their overlap. The
policy heads learn to land their soft-argmax positions inside those ranges.

Span conventions: ``diff_span`` and ``overlap_coeff`` work on half-open
spans; policy targets and bounds use inclusive end positions, with a
zero-width span standing for the character at its start.
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from amtl.config import PolicyConfig
from amtl.corruption import MIN_SENTENCE, Span, diff_span, inject_errors
from amtl.dataset import data_lines, header_lines
from amtl.errors import ContractError, EmptyCorpusError, NoDiffError
from amtl.models import PolicyOutput, SpanBounds, TokenSeq
from amtl.network import AMTLModel, ModelState
from amtl.optim import AdamW
from amtl.tensor import Tensor, as_tensor, no_grad, soft_argmax
from amtl.vocab import Vocab

logger = logging.getLogger(__name__)


def inclusive(span: Span, k: int) -> Span:
    """Half-open span to inclusive ``(start, end)``; zero width covers the character at start."""
    start, end = span
    start = min(start, k - 1)
    return start, max(start, min(end - 1, k - 1))


def range_bounds(
    is_wo: int, ie_wo: int, is_wcw: int, ie_wcw: int, strict: bool = False
) -> SpanBounds:
    """
    Start and end ranges from the two difference spans.

    ``[S_l, S_h]`` spans both starts and ``[E_l, E_h]`` both ends. With
    ``strict`` the end minimum takes the corrected span's start in place of
    its end.
    """
    e_low = min(ie_wo, is_wcw) if strict else min(ie_wo, ie_wcw)
    return SpanBounds(
        S_l=min(is_wo, is_wcw),
        S_h=max(is_wo, is_wcw),
        E_l=e_low,
        E_h=max(ie_wo, ie_wcw),
    )


def overlap_coeff(span_a: Span, span_b: Span) -> float:
    """
    ``|a ∩ b|^2 / (|a| |b|)`` over half-open character spans.

    Two empty spans agree trivially (1.0); one empty span overlaps nothing.
    """
    len_a, len_b = span_a[1] - span_a[0], span_b[1] - span_b[0]
    if len_a < 0 or len_b < 0:
        raise ContractError("spans must not end before they start")
    if len_a == 0 and len_b == 0:
        logger.info("overlap of two empty spans", extra={"a": span_a, "b": span_b})
        return 1.0
    if len_a == 0 or len_b == 0:
        return 0.0
    inter = max(0, min(span_a[1], span_b[1]) - max(span_a[0], span_b[0]))
    return inter * inter / (len_a * len_b)


def _range_loss(sam: Tensor, low: float, high: float, mu: float) -> Tensor:
    below = (sam - low) ** 2 * (low - sam).exp()
    above = (sam - high) ** 2 * (sam - high).exp()
    return below * mu + above * (1.0 - mu)


def policy_loss(
    x_s: Tensor | Sequence[float] | PolicyOutput,
    x_e: Optional[Tensor | Sequence[float]] = None,
    bounds: Optional[SpanBounds] = None,
) -> Tensor:
    """
    ``0.5 L_Rs + 0.5 L_Re`` with
    ``L_R = mu (sam - low)^2 e^(low - sam) + (1 - mu) (sam - high)^2 e^(sam - high)``.

    Accepts either ``(x_s, x_e, bounds)`` or ``(PolicyOutput, bounds=...)``.
    """
    if isinstance(x_s, PolicyOutput):
        x_s, x_e = x_s.x_s, x_s.x_e
    if x_e is None or bounds is None:
        raise ContractError("policy_loss needs start logits, end logits and bounds")
    x_s, x_e = as_tensor(x_s), as_tensor(x_e)
    l_rs = _range_loss(soft_argmax(x_s), bounds.S_l, bounds.S_h, bounds.mu)
    l_re = _range_loss(soft_argmax(x_e), bounds.E_l, bounds.E_h, bounds.mu)
    return l_rs * 0.5 + l_re * 0.5


class PolicySample(BaseModel):
    """A corrupted sentence and its range supervision."""

    wrong: TokenSeq
    bounds: SpanBounds


def supervise(
    wrong: TokenSeq, original: TokenSeq, corrected: TokenSeq, strict: bool = False
) -> SpanBounds:
    """
    Range supervision from one search result.

    Raises:
        NoDiffError: If the search returned ``wrong`` unchanged
    """
    wo = diff_span(wrong, original)
    wcw = diff_span(wrong, corrected)
    s_wo, e_wo = inclusive(wo, wrong.k)
    s_wcw, e_wcw = inclusive(wcw, wrong.k)
    bounds = range_bounds(s_wo, e_wo, s_wcw, e_wcw, strict)
    return bounds.model_copy(update={"mu": overlap_coeff(wo, wcw)})


def generate_supervision(
    corpus: Sequence[TokenSeq],
    cfg: PolicyConfig,
    vocab: Vocab,
    corrector=None,
) -> Tuple[List[PolicySample], int]:
    """
    Corrupt ``cfg.samples`` sentences and derive span supervision.

    Args:
        corpus: Clean sentences, cycled when shorter than ``cfg.samples``
        cfg: Sample count, seed and target
        vocab: Source of replacement characters
        corrector: Corrector whose full search provides the targets; unused
            when ``cfg.target`` is ``"ground_truth"``

    Returns:
        ``(samples, skipped)``; a sample is skipped when the search leaves
        the corrupted sentence unchanged
    """
    usable = [s for s in corpus if s.k >= MIN_SENTENCE]
    if not usable:
        raise EmptyCorpusError(f"no sentence of length {MIN_SENTENCE} or more")
    if cfg.target == "search" and corrector is None:
        raise ContractError("search supervision needs a corrector")
    rng = np.random.default_rng([cfg.seed, 3])
    samples, skipped = [], 0
    for i in range(cfg.samples):
        record = inject_errors(usable[i % len(usable)], rng, vocab)
        wrong = record.corrupted
        if cfg.target == "ground_truth":
            span = (record.span_start, record.span_end)
            start, end = inclusive(span, wrong.k)
            samples.append(PolicySample(wrong=wrong, bounds=range_bounds(start, end, start, end)))
            continue
        try:
            corrected = corrector.correct(wrong)
            bounds = supervise(wrong, record.clean, corrected, cfg.end_low_from_start)
        except NoDiffError:
            skipped += 1
            continue
        samples.append(PolicySample(wrong=wrong, bounds=bounds))
    if skipped:
        logger.warning("skipped samples the search left unchanged", extra={"skipped": skipped})
    return samples, skipped


def write_supervision(
    path: str | Path,
    samples: Sequence[PolicySample],
    vocab: Vocab,
    config_lines: Sequence[str] = (),
) -> None:
    """Cache file: ``wrong<TAB>S_l<TAB>S_h<TAB>E_l<TAB>E_h<TAB>mu`` per line."""
    lines = header_lines(config_lines)
    for sample in samples:
        b = sample.bounds
        fields = [vocab.decode(sample.wrong), b.S_l, b.S_h, b.E_l, b.E_h, repr(b.mu)]
        lines.append("\t".join(str(f) for f in fields))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_supervision(path: str | Path, vocab: Vocab) -> List[PolicySample]:
    """
    Read a supervision cache.

    Raises:
        ContractError: On a malformed line
    """
    samples = []
    for lineno, line in data_lines(path):
        fields = line.split("\t")
        if len(fields) != 6:
            raise ContractError(f"{path}:{lineno}: expected 6 tab-separated fields")
        try:
            s_l, s_h, e_l, e_h = (int(v) for v in fields[1:5])
            bounds = SpanBounds(S_l=s_l, S_h=s_h, E_l=e_l, E_h=e_h, mu=float(fields[5]))
        except ValueError as e:
            raise ContractError(f"{path}:{lineno}: bad bounds ({type(e).__name__})") from e
        samples.append(PolicySample(wrong=vocab.encode(fields[0]), bounds=bounds))
    return samples


def fit_policy(
    model: AMTLModel, samples: Sequence[PolicySample], cfg: PolicyConfig
) -> List[float]:
    """
    Train the policy heads on ``samples``; encoder and LM heads stay frozen.

    Encoder states are computed in eval mode without a graph; dropout
    applies to the policy heads only.

    Returns:
        Mean loss per epoch
    """
    if not samples:
        raise EmptyCorpusError("no policy supervision to train on")
    optimizer = AdamW(model.head_parameters("policy_start", "policy_end"), cfg.lr, cfg.weight_decay)
    order_rng = np.random.default_rng([cfg.seed, 4])
    history = []
    for epoch in range(1, cfg.epochs + 1):
        total = 0.0
        order = order_rng.permutation(len(samples))
        for start in range(0, len(samples), cfg.batch):
            batch = [samples[i] for i in order[start : start + cfg.batch]]
            model.eval()
            with no_grad():
                hidden = model.hidden([s.wrong for s in batch])
            model.train()
            model.encoder.eval()
            optimizer.zero_grad()
            x_s, x_e = model.policy_logits(hidden)
            loss = Tensor(0.0)
            for b, sample in enumerate(batch):
                k = sample.wrong.k
                loss = loss + policy_loss(x_s[b, 1 : k + 1], x_e[b, 1 : k + 1], sample.bounds)
            loss = loss * (1.0 / len(batch))
            loss.backward()
            optimizer.step()
            total += loss.item() * len(batch)
        history.append(total / len(samples))
        logger.info("policy epoch finished", extra={"epoch": epoch, "loss": history[-1]})
    model.eval()
    return history


def train_policy(
    corpus: Sequence[TokenSeq], model: AMTLModel, cfg: PolicyConfig, corrector=None
) -> ModelState:
    """
    Generate supervision with the full search and train the policy heads.

    Args:
        corpus: Clean sentences
        model: Trained model; its policy heads are updated in place
        cfg: Policy training settings
        corrector: Search to distil; defaults to one driven by ``model``
    """
    if corrector is None and cfg.target == "search":
        from amtl.correction import Corrector
        from pipeline import build_plugin_manager

        corrector = Corrector(build_plugin_manager(model))
    model.eval()
    samples, _ = generate_supervision(corpus, cfg, model.vocab, corrector)
    fit_policy(model, samples, cfg)
    return model.state()

"""
Evaluation harness.

Corrupts held-out clean sentences and measures detection (scoring head),
masked-LM accuracy, restoration BLEU and fluency of the corrections. When a
policy model is registered, the fast path is compared with the full search.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from amtl.config import RunConfig
from amtl.corruption import MAX_SPAN, MIN_SENTENCE, inject_errors, inject_errors_multi
from amtl.correction import Corrector
from amtl.dataset import header_lines
from amtl.errors import EmptyCorpusError
from amtl.grammar import is_grammatical
from amtl.metrics import (
    bleu,
    detection_hit,
    mlm_metrics,
    ppl_ratio,
    token_prob_ratio,
    widen_empty,
)
from amtl.models import MASK_ID, EvalReport, TokenSeq
from amtl.plugin_manager import PluginManager
from amtl.vocab import Vocab

logger = logging.getLogger(__name__)

Span = Tuple[int, int]


def _intersects(a: Span, b: Span, length: int) -> bool:
    a, b = widen_empty(a, length), widen_empty(b, length)
    return max(a[0], b[0]) < min(a[1], b[1])


def _clip(span: Span, length: int) -> Span:
    start = min(span[0], length - 1)
    return start, min(max(span[1], start + 1), length)


def _mlm_predictions(
    sentences: Sequence[TokenSeq], pm: PluginManager, ratio: float, rng: np.random.Generator
) -> Tuple[List[int], List[int]]:
    predictions, targets, masked, positions = [], [], [], []
    for s in sentences:
        n_mask = min(s.k, max(1, int(round(ratio * s.k))))
        pos = sorted(int(p) for p in rng.choice(s.k, size=n_mask, replace=False))
        ids = list(s.ids)
        for p in pos:
            ids[p] = MASK_ID
            targets.append(s.ids[p])
        masked.append(TokenSeq(ids=tuple(ids)))
        positions.append(pos)
    for row in pm.mask_distributions(masked, positions):
        predictions.extend(d.ranked_ids[0] for d in row)
    return predictions, targets


def _corrupt(s: TokenSeq, rng: np.random.Generator, vocab: Vocab, n_spans: int):
    if n_spans == 1 or s.k // n_spans < MAX_SPAN + 1:
        record = inject_errors(s, rng, vocab)
        return record.corrupted, [(record.span_start, record.span_end)]
    record = inject_errors_multi(s, rng, n_spans, vocab)
    return record.corrupted, list(record.spans)


def run_evaluation(
    sentences: Sequence[TokenSeq],
    pm: PluginManager,
    config: RunConfig,
    vocab: Vocab,
    fast: bool = False,
) -> EvalReport:
    """
    Evaluate the models registered in ``pm`` on corrupted held-out sentences.

    Args:
        sentences: Clean held-out sentences (cycled up to ``eval.samples``)
        pm: Plugin manager answering scoring and masked-LM hooks, and the
            policy hook when ``fast`` is set
        config: Resolved run config; echoed into the report
        vocab: Vocabulary for corruption and grammar checks
        fast: Also run the policy-guided path and compare it with the full search

    Raises:
        EmptyCorpusError: If no sentence is long enough to corrupt
    """
    cfg = config.eval
    usable = [s for s in sentences if s.k >= MIN_SENTENCE]
    if not usable:
        raise EmptyCorpusError(f"no held-out sentence of length {MIN_SENTENCE} or more")
    rng = np.random.default_rng([cfg.seed, 5])
    clean = [usable[i % len(usable)] for i in range(cfg.samples)]
    corrector = Corrector(pm, config.corrector)
    rounds = max(config.corrector.rounds, cfg.multi_span)

    wrongs, spans = zip(*(_corrupt(s, rng, vocab, cfg.multi_span) for s in clean))
    scores = pm.score_tokens(list(wrongs))
    hits = [
        int(any(detection_hit(sv, span, cfg.topk) for span in true_spans))
        for sv, true_spans in zip(scores, spans)
    ]

    predictions, targets = _mlm_predictions(clean, pm, cfg.mask_ratio, rng)
    acc, prec, rec, f1 = mlm_metrics(predictions, targets, cfg.average)

    totals: Dict[str, List[float]] = {
        key: [] for key in ("bleu_c", "bleu_u", "ppl", "prob", "passes_full", "passes_fast")
    }
    violations = agree = 0
    predicted: List[Span] = []
    for s, wrong in zip(clean, wrongs):
        if rounds > 1:
            corrected = corrector.correct_iterative(wrong, rounds)
        else:
            trace = corrector.search(wrong)
            corrected = trace.best.filled
            totals["passes_full"].append(trace.forward_passes)
        totals["bleu_c"].append(bleu(corrected, s))
        totals["bleu_u"].append(bleu(wrong, s))
        totals["ppl"].append(ppl_ratio(wrong, corrected, pm))
        totals["prob"].append(token_prob_ratio(wrong, corrected, pm))
        if corrected.k == 0 or not is_grammatical(vocab.decode(corrected)):
            violations += 1
        if fast:
            fast_trace = corrector.search_fast(wrong)
            totals["passes_fast"].append(fast_trace.forward_passes)
            agree += int(fast_trace.best.filled == corrected)
            predicted.append(fast_trace.seed_span)

    extra: Dict[str, Optional[float]] = {}
    if fast:
        overlap = [
            any(_intersects(p, t, w.k) for t in true_spans)
            for p, true_spans, w in zip(predicted, spans, wrongs)
        ]
        # Shuffled baseline: each sentence gets another sentence's predicted span.
        shuffled = [predicted[i] for i in rng.permutation(len(predicted))]
        baseline = [
            any(_intersects(_clip(p, w.k), t, w.k) for t in true_spans)
            for p, true_spans, w in zip(shuffled, spans, wrongs)
        ]
        extra = {
            "fast_agreement": agree / len(clean),
            "policy_overlap": float(np.mean(overlap)),
            "random_overlap": float(np.mean(baseline)),
            "mean_passes_fast": float(np.mean(totals["passes_fast"])),
        }
    if totals["passes_full"]:
        extra["mean_passes_full"] = float(np.mean(totals["passes_full"]))

    report = EvalReport(
        slm_topk_acc=float(np.mean(hits)),
        mlm_acc=acc,
        mlm_prec=prec,
        mlm_rec=rec,
        mlm_f1=f1,
        bleu_corrected=float(np.mean(totals["bleu_c"])),
        bleu_uncorrected=float(np.mean(totals["bleu_u"])),
        ppl_ratio=float(np.mean(totals["ppl"])),
        token_prob_ratio=float(np.mean(totals["prob"])),
        grammar_violations=violations,
        n_samples=len(clean),
        config=config.flat(),
        **extra,
    )
    logger.info(
        "evaluation finished",
        extra={"samples": report.n_samples, "slm_topk_acc": report.slm_topk_acc},
    )
    return report


METRIC_KEYS = (
    "slm_topk_acc",
    "mlm_acc",
    "mlm_prec",
    "mlm_rec",
    "mlm_f1",
    "bleu_corrected",
    "bleu_uncorrected",
    "ppl_ratio",
    "token_prob_ratio",
    "grammar_violations",
    "n_samples",
    "fast_agreement",
    "policy_overlap",
    "random_overlap",
    "mean_passes_full",
    "mean_passes_fast",
)


def report_items(report: EvalReport) -> List[Tuple[str, str]]:
    """Metric name and rendered value, skipping metrics that were not measured."""
    items = []
    for key in METRIC_KEYS:
        value = getattr(report, key)
        if value is None:
            continue
        items.append((key, f"{value:.6f}" if isinstance(value, float) else str(value)))
    return items


def format_table(report: EvalReport) -> str:
    """Human-readable two-column table."""
    items = report_items(report)
    width = max(len(k) for k, _ in items)
    rule = "-" * (width + 14)
    lines = [rule, f"{'metric'.ljust(width)}  value", rule]
    lines += [f"{k.ljust(width)}  {v}" for k, v in items]
    lines.append(rule)
    return "\n".join(lines)


def write_report(report: EvalReport, path: str | Path, config_lines: Sequence[str] = ()) -> None:
    """``key=value`` report under ``#!amtl`` header lines."""
    lines = header_lines(config_lines) + [f"{k}={v}" for k, v in report_items(report)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_report(path: str | Path) -> Dict[str, str]:
    """Metrics from a report or held-out metrics file."""
    values = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        if raw.startswith("#") or "=" not in raw:
            continue
        key, value = raw.split("=", 1)
        values[key] = value
    return values

"""
Error injection (variable-length replacement).

One contiguous span of 1..4 characters is replaced by a random string of
0..4 content characters; lengths are drawn independently, so the corrupted
sentence may be shorter, equal or longer. Spans are half-open and reported
in corrupted-sentence coordinates.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from amtl.errors import ContractError, NoDiffError, TooShortError
from amtl.models import ErrorRecord, MultiErrorRecord, TokenSeq
from amtl.vocab import Vocab

logger = logging.getLogger(__name__)

MAX_SPAN = 4
MIN_SENTENCE = 6
MAX_ATTEMPTS = 64

Span = Tuple[int, int]


def _rng(seed: int | np.random.Generator) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _replacement(
    rng: np.random.Generator, content_ids: Sequence[int], length: int
) -> Tuple[int, ...]:
    return tuple(int(t) for t in rng.choice(content_ids, size=length))


def diff_span(a: TokenSeq, b: TokenSeq) -> Span:
    """
    Minimal differing window of ``a`` against ``b``, half-open in ``a``.

    The longest common prefix and suffix are stripped, the suffix limited so
    the two never overlap in the shorter sequence.

    Raises:
        NoDiffError: If the sequences are equal
    """
    if a == b:
        raise NoDiffError("sequences are identical")
    x, y = a.ids, b.ids
    limit = min(len(x), len(y))
    p = 0
    while p < limit and x[p] == y[p]:
        p += 1
    q = 0
    while q < limit - p and x[len(x) - 1 - q] == y[len(y) - 1 - q]:
        q += 1
    return p, len(x) - q


def inject_errors(
    s: TokenSeq, seed: int | np.random.Generator, vocab: Optional[Vocab] = None
) -> ErrorRecord:
    """
    Corrupt one span of ``s``.

    The lengths are drawn once; the position and the replacement are redrawn
    until the pair differs in exactly the recorded span under prefix/suffix
    alignment.

    Args:
        s: Clean sentence, at least 6 tokens
        seed: Integer seed or a Generator to draw from
        vocab: Source of replacement characters (toy vocabulary by default)

    Returns:
        ErrorRecord with the corrupted sentence and its span

    Raises:
        TooShortError: If ``s`` has fewer than 6 tokens
    """
    if s.k < MIN_SENTENCE:
        raise TooShortError(f"sentence of length {s.k} is shorter than {MIN_SENTENCE}")
    vocab = vocab or Vocab.toy()
    rng = _rng(seed)
    orig_len = int(rng.integers(1, MAX_SPAN + 1))
    repl_len = int(rng.integers(0, MAX_SPAN + 1))
    corrupted = s
    for _ in range(MAX_ATTEMPTS):
        start = int(rng.integers(0, s.k - orig_len + 1))
        replacement = _replacement(rng, vocab.content_ids, repl_len)
        candidate = s.replace_span(start, start + orig_len, replacement)
        if candidate == s:
            continue
        corrupted = candidate
        if diff_span(corrupted, s) == (start, start + repl_len):
            return ErrorRecord(
                clean=s,
                corrupted=corrupted,
                span_start=start,
                span_end=start + repl_len,
                orig_len=orig_len,
                repl_len=repl_len,
            )
    if corrupted == s:
        raise ContractError(f"no corruption of length {orig_len} changes the sentence")
    # Fall back to the aligned window of the last draw.
    span_start, span_end = diff_span(corrupted, s)
    clean_start, clean_end = diff_span(s, corrupted)
    logger.info(
        "recorded aligned span after exhausting redraws",
        extra={"orig_len": orig_len, "repl_len": repl_len},
    )
    return ErrorRecord(
        clean=s,
        corrupted=corrupted,
        span_start=span_start,
        span_end=span_end,
        orig_len=clean_end - clean_start,
        repl_len=span_end - span_start,
    )


def inject_errors_multi(
    s: TokenSeq,
    seed: int | np.random.Generator,
    n_spans: int,
    vocab: Optional[Vocab] = None,
) -> MultiErrorRecord:
    """
    Corrupt ``n_spans`` non-overlapping, non-adjacent spans of ``s``.

    The sentence is cut into ``n_spans`` equal regions and one span is
    placed inside each, so spans keep at least one clean character between
    them. Replacements are applied right to left so earlier offsets hold.

    Raises:
        ContractError: If the sentence is too short for that many spans
    """
    if n_spans < 1:
        raise ContractError("n_spans must be at least 1")
    region = s.k // n_spans
    if region < MAX_SPAN + 1 or s.k < MIN_SENTENCE:
        raise ContractError(f"sentence of length {s.k} cannot hold {n_spans} spans")
    vocab = vocab or Vocab.toy()
    rng = _rng(seed)

    edits: List[Tuple[int, int, Tuple[int, ...]]] = []
    for r in range(n_spans):
        lo = r * region
        orig_len = int(rng.integers(1, MAX_SPAN + 1))
        repl_len = int(rng.integers(0, MAX_SPAN + 1))
        start = lo + int(rng.integers(0, region - orig_len))
        edits.append((start, start + orig_len, _replacement(rng, vocab.content_ids, repl_len)))

    corrupted = s
    for start, end, replacement in reversed(edits):
        corrupted = corrupted.replace_span(start, end, replacement)

    spans, shift = [], 0
    for start, end, replacement in edits:
        spans.append((start + shift, start + shift + len(replacement)))
        shift += len(replacement) - (end - start)
    if corrupted == s:
        logger.info("multi-span injection reproduced the clean sentence", extra={"k": s.k})
    return MultiErrorRecord(clean=s, corrupted=corrupted, spans=spans)

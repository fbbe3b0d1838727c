"""
Dataset files.

Pair files hold one record per line, ``corrupted<TAB>clean<TAB>span_start<TAB>span_end``.
Sentence files hold one clean sentence per line. Files written here open
with ``#!amtl`` header lines carrying the format version and the resolved
config; readers skip them, so hand-made files without headers load too.
"""

import logging
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from amtl.errors import ContractError, EmptyCorpusError
from amtl.models import FORMAT_VERSION, ErrorRecord, TokenSeq
from amtl.vocab import Vocab

logger = logging.getLogger(__name__)

HEADER_PREFIX = "#!amtl "


def header_lines(config_lines: Sequence[str] = ()) -> List[str]:
    """Artifact header: format version followed by resolved config lines."""
    return [f"{HEADER_PREFIX}format_version={FORMAT_VERSION}"] + [
        f"{HEADER_PREFIX}{line}" for line in config_lines
    ]


def data_lines(path: str | Path) -> Iterable[Tuple[int, str]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if line.startswith(HEADER_PREFIX) or not line:
                continue
            yield lineno, line


def read_sentences(path: str | Path) -> List[str]:
    """Read a one-sentence-per-line UTF-8 file."""
    sentences = [line for _, line in data_lines(path)]
    if not sentences:
        raise EmptyCorpusError(f"{path} contains no sentences")
    return sentences


def write_sentences(
    path: str | Path, sentences: Iterable[str], config_lines: Sequence[str] = ()
) -> None:
    lines = header_lines(config_lines) + list(sentences)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_pairs(path: str | Path, vocab: Vocab) -> List[Tuple[TokenSeq, TokenSeq, int, int]]:
    """
    Read ``corrupted, clean, span_start, span_end`` records.

    Raises:
        ContractError: On a malformed line
    """
    records = []
    for lineno, line in data_lines(path):
        fields = line.split("\t")
        if len(fields) != 4:
            raise ContractError(f"{path}:{lineno}: expected 4 tab-separated fields")
        corrupted, clean, start, end = fields
        try:
            span = (int(start), int(end))
        except ValueError as e:
            raise ContractError(f"{path}:{lineno}: span bounds must be integers") from e
        records.append((vocab.encode(corrupted), vocab.encode(clean), *span))
    return records


def write_pairs(
    path: str | Path,
    records: Iterable[ErrorRecord],
    vocab: Vocab,
    config_lines: Sequence[str] = (),
) -> None:
    lines = header_lines(config_lines)
    for record in records:
        lines.append(
            "\t".join(
                [
                    vocab.decode(record.corrupted),
                    vocab.decode(record.clean),
                    str(record.span_start),
                    str(record.span_end),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def encode_corpus(
    sentences: Sequence[str], vocab: Optional[Vocab] = None
) -> Tuple[Vocab, List[TokenSeq]]:
    """
    Encode raw sentences, building a vocabulary from them when none is given.

    This is the ingestion path for real UTF-8 text.
    """
    vocab = vocab or Vocab.from_texts(sentences)
    return vocab, [vocab.encode(s) for s in sentences]


def split_holdout(
    corpus: Sequence[TokenSeq], fraction: float, seed: int
) -> Tuple[List[TokenSeq], List[TokenSeq]]:
    """
    Deterministic train / held-out split.

    Returns:
        ``(train, held_out)``; held_out is empty when ``fraction`` is 0
    """
    if not corpus:
        raise EmptyCorpusError("cannot split an empty corpus")
    order = np.random.default_rng(seed).permutation(len(corpus))
    n_held = int(round(fraction * len(corpus)))
    if fraction > 0 and n_held == 0:
        n_held = 1
    if n_held >= len(corpus):
        n_held = len(corpus) - 1
    held = [corpus[i] for i in sorted(order[:n_held])]
    train = [corpus[i] for i in sorted(order[n_held:])]
    logger.info("split corpus", extra={"train": len(train), "held_out": len(held)})
    return train, held

"""
AMTL Core Models

Pydantic v2 models for the values that flow between the toy language, the
language models, the correction search and the evaluation harness.

Token ids are dense: the four specials occupy 0..3 and content characters
follow. A TokenSeq stores content positions only; BOS/EOS framing and PAD are
added by the network and never appear inside a TokenSeq. MASK is a
placeholder that may sit at a content position.
"""

import math
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

PAD_ID = 0
MASK_ID = 1
BOS_ID = 2
EOS_ID = 3
N_SPECIALS = 4

FORMAT_VERSION = 1


class PhaseSchedule(str, Enum):
    """Training arms of the ablation: which objectives run per batch."""

    SUPERVISED = "supervised"
    MTL = "mtl"
    GAN = "gan"
    AMTL = "amtl"

    @classmethod
    def _missing_(cls, value: object) -> Optional["PhaseSchedule"]:
        if value == "mtl-only":
            return cls.MTL
        return None


class TokenSeq(BaseModel):
    """
    An encoded sentence.

    Immutable and hashable so sequences can key caches and sets.
    """

    model_config = ConfigDict(frozen=True)

    ids: Tuple[int, ...] = Field(default=(), description="Token ids at content positions")

    @field_validator("ids")
    @classmethod
    def _no_framing_tokens(cls, ids: Tuple[int, ...]) -> Tuple[int, ...]:
        for token in ids:
            if token < 0 or token in (PAD_ID, BOS_ID, EOS_ID):
                raise ValueError(f"token id {token} cannot appear at a content position")
        return ids

    @property
    def k(self) -> int:
        """Length in content positions."""
        return len(self.ids)

    def __len__(self) -> int:
        return len(self.ids)

    def mask_positions(self) -> List[int]:
        return [i for i, token in enumerate(self.ids) if token == MASK_ID]

    def replace_span(self, start: int, end: int, replacement: Tuple[int, ...]) -> "TokenSeq":
        """Return a copy with ids[start:end] replaced (half-open)."""
        if not 0 <= start <= end <= self.k:
            raise ValueError(f"span [{start}, {end}) outside sentence of length {self.k}")
        return TokenSeq(ids=self.ids[:start] + tuple(replacement) + self.ids[end:])

    def mask_span(self, start: int, end: int, num: int) -> "TokenSeq":
        """Replace ids[start:end] with ``num`` MASK tokens."""
        return self.replace_span(start, end, (MASK_ID,) * num)


class ErrorRecord(BaseModel):
    """A clean sentence, its corrupted form and the corrupted span."""

    model_config = ConfigDict(frozen=True)

    clean: TokenSeq
    corrupted: TokenSeq
    span_start: int = Field(..., ge=0, description="Start of the replacement in corrupted")
    span_end: int = Field(..., ge=0, description="Half-open end of the replacement in corrupted")
    orig_len: int = Field(..., ge=0, le=4, description="Length of the replaced clean string")
    repl_len: int = Field(..., ge=0, le=4, description="Length of the inserted string")

    @model_validator(mode="after")
    def _check_span(self) -> "ErrorRecord":
        if self.corrupted == self.clean:
            raise ValueError("corrupted sentence must differ from clean")
        if self.repl_len != self.span_end - self.span_start:
            raise ValueError("repl_len must equal span_end - span_start")
        if self.orig_len == 0 and self.repl_len == 0:
            raise ValueError("orig_len and repl_len cannot both be zero")
        if self.span_end > self.corrupted.k:
            raise ValueError("span exceeds corrupted sentence")
        return self


class MultiErrorRecord(BaseModel):
    """Several non-overlapping corruptions of one sentence (evaluation stress test)."""

    model_config = ConfigDict(frozen=True)

    clean: TokenSeq
    corrupted: TokenSeq
    spans: List[Tuple[int, int]] = Field(..., description="Half-open spans in corrupted, ascending")


class CandidateDistribution(BaseModel):
    """Masked-LM candidates for one masked position, best first."""

    position: int = Field(..., ge=0)
    ranked_ids: List[int] = Field(..., description="Content token ids by descending confidence")
    d: List[float] = Field(..., description="Confidences aligned with ranked_ids")

    @model_validator(mode="after")
    def _check_distribution(self) -> "CandidateDistribution":
        if len(self.ranked_ids) != len(self.d):
            raise ValueError("ranked_ids and d must have equal length")
        if len(set(self.ranked_ids)) != len(self.ranked_ids):
            raise ValueError("ranked_ids must not repeat")
        # Closed interval: float64 softmax can round a saturated entry to 0 or 1.
        if any(not 0.0 <= v <= 1.0 for v in self.d):
            raise ValueError("confidences must lie in [0, 1]")
        if any(b > a for a, b in zip(self.d, self.d[1:])):
            raise ValueError("confidences must be non-increasing")
        if sum(self.d) > 1.0 + 1e-9:
            raise ValueError("confidences must sum to at most 1")
        return self

    def confidence_of(self, token_id: int) -> float:
        return self.d[self.ranked_ids.index(token_id)]


class ScoreVector(BaseModel):
    """Per-token wrongness probabilities; higher means more likely erroneous."""

    scores: List[float] = Field(..., description="One probability per content position")

    @field_validator("scores")
    @classmethod
    def _in_unit_interval(cls, scores: List[float]) -> List[float]:
        if any(not 0.0 <= s <= 1.0 for s in scores):
            raise ValueError("scores must lie in [0, 1]")
        return scores

    def __len__(self) -> int:
        return len(self.scores)


class PolicyOutput(BaseModel):
    """Start and end logits over the positions of a sentence."""

    x_s: List[float]
    x_e: List[float]

    @model_validator(mode="after")
    def _check_logits(self) -> "PolicyOutput":
        if len(self.x_s) != len(self.x_e):
            raise ValueError("x_s and x_e must have equal length")
        if not all(math.isfinite(v) for v in self.x_s + self.x_e):
            raise ValueError("policy logits must be finite")
        return self


class SpanBounds(BaseModel):
    """Range supervision for the policy network."""

    model_config = ConfigDict(frozen=True)

    S_l: int
    S_h: int
    E_l: int
    E_h: int
    mu: float = Field(1.0, ge=0.0, le=1.0, description="Overlap coefficient")

    @model_validator(mode="after")
    def _ordered(self) -> "SpanBounds":
        if self.S_l > self.S_h or self.E_l > self.E_h:
            raise ValueError("bounds must satisfy S_l <= S_h and E_l <= E_h")
        return self


class CandidateEdit(BaseModel):
    """One leaf of the correction search: a span refilled with ``num`` tokens."""

    p_s: int = Field(..., ge=0)
    p_e: int = Field(..., ge=0)
    num: int = Field(..., ge=0)
    source_k: int = Field(..., ge=0, description="Length of the sentence being corrected")
    filled: TokenSeq
    norm_score: float = Field(..., description="Mean wrongness of the filled sentence")

    @model_validator(mode="after")
    def _check_length(self) -> "CandidateEdit":
        if self.filled.k != self.source_k - (self.p_e - self.p_s) + self.num:
            raise ValueError("filled length inconsistent with span and num")
        return self

    @property
    def is_identity(self) -> bool:
        return self.p_e == self.p_s and self.num == 0

    @property
    def cost(self) -> int:
        """Characters removed plus characters inserted."""
        return (self.p_e - self.p_s) + self.num

    def sort_key(self) -> Tuple[float, int, int, int, int]:
        return (self.norm_score, self.cost, self.p_s, self.num, self.p_e)


class SearchTrace(BaseModel):
    """Everything the search saw for one sentence; backs ``--explain``."""

    source: TokenSeq
    best: CandidateEdit
    candidates: List[CandidateEdit] = Field(default_factory=list)
    seed_span: Tuple[int, int] = Field(..., description="Peak position or predicted span")
    passes: Dict[str, int] = Field(default_factory=dict, description="Sentence forward passes")

    @property
    def forward_passes(self) -> int:
        """Seed pass plus one rescoring pass per candidate."""
        return self.passes.get("seed", 0) + self.passes.get("score", 0)


class AdversarialBatch(BaseModel):
    """
    Sentences with generated replacements and their discriminator targets.

    Per-sentence lists are aligned; ``generated[b]`` is R and ``original[b]``
    is C for sentence b.
    """

    originals: List[TokenSeq]
    masked: List[TokenSeq]
    sentences: List[TokenSeq] = Field(..., description="Masked positions filled by the generator")
    generated: List[List[int]] = Field(..., description="R: generated positions")
    original: List[List[int]] = Field(..., description="C: untouched positions")
    labels: List[List[int]] = Field(..., description="1 = wrong, 0 = correct, every position")
    ranks: List[List[int]] = Field(..., description="Sampled rank per generated position")
    original_ids: List[List[int]] = Field(..., description="Ground truth at generated positions")
    w_g: List[List[float]] = Field(..., description="Generator-to-discriminator weight, all k")
    skipped: int = Field(0, ge=0, description="Sentences without maskable positions")

    @model_validator(mode="after")
    def _check_partition(self) -> "AdversarialBatch":
        for b, sentence in enumerate(self.sentences):
            r, c = set(self.generated[b]), set(self.original[b])
            if r & c or r | c != set(range(sentence.k)):
                raise ValueError(f"R and C must partition the positions of sentence {b}")
            if len(self.ranks[b]) != len(self.generated[b]):
                raise ValueError("every generated position needs a rank")
        return self

    def __len__(self) -> int:
        return len(self.sentences)


class GradReport(BaseModel):
    """Outcome of a finite-difference gradient check."""

    max_rel_err: float = Field(..., ge=0.0)
    worst_param_path: str = Field("", description="name[index] of the worst coordinate")
    n_checked: int = Field(0, ge=0)


class EvalReport(BaseModel):
    """Held-out metrics; echoes the config that produced them."""

    slm_topk_acc: float = Field(..., ge=0.0, le=1.0)
    mlm_acc: float = Field(..., ge=0.0, le=1.0)
    mlm_prec: float = Field(..., ge=0.0, le=1.0)
    mlm_rec: float = Field(..., ge=0.0, le=1.0)
    mlm_f1: float = Field(..., ge=0.0, le=1.0)
    bleu_corrected: float = Field(..., ge=0.0, le=1.0)
    bleu_uncorrected: float = Field(..., ge=0.0, le=1.0)
    ppl_ratio: float = Field(..., gt=0.0)
    token_prob_ratio: float = Field(..., gt=0.0)
    grammar_violations: int = Field(..., ge=0, description="Corrected outputs outside the grammar")
    n_samples: int = Field(..., ge=0)
    fast_agreement: Optional[float] = Field(None, ge=0.0, le=1.0)
    policy_overlap: Optional[float] = Field(None, ge=0.0, le=1.0)
    random_overlap: Optional[float] = Field(None, ge=0.0, le=1.0)
    mean_passes_full: Optional[float] = None
    mean_passes_fast: Optional[float] = None
    config: Dict[str, Any] = Field(default_factory=dict)

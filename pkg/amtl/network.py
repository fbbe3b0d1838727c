"""
AMTL Model

The shared character encoder with its three heads:

- ``mlm_head``: masked-LM logits over the content characters (the generator)
- ``score_head``: one wrongness logit per position (the discriminator)
- ``policy_start`` / ``policy_end``: start and end logits of the error span

Sentences are framed as ``[BOS] ids [EOS]`` and right-padded within a
batch; head outputs are read at content positions only. Parameter names are
dotted paths; everything under ``encoder.`` is the common encoder.
"""

import logging
from typing import Dict, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from amtl.config import ModelConfig
from amtl.errors import ContractError, LengthError
from amtl.layers import Embedding, EncoderLayer, LayerNorm, Linear, Module
from amtl.models import (
    BOS_ID,
    EOS_ID,
    FORMAT_VERSION,
    MASK_ID,
    N_SPECIALS,
    PAD_ID,
    CandidateDistribution,
    PolicyOutput,
    ScoreVector,
    TokenSeq,
)
from amtl.tensor import Tensor, dropout, no_grad, softmax
from amtl.vocab import Vocab

logger = logging.getLogger(__name__)

ENCODER_PREFIX = "encoder."
NEG_INF = -1e9


class ModelState(BaseModel):
    """Detached copy of every parameter plus what is needed to rebuild the model."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    config: ModelConfig
    vocab: Vocab
    params: Dict[str, np.ndarray] = Field(..., description="Parameter arrays by dotted name")
    format_version: int = FORMAT_VERSION

    @property
    def n_parameters(self) -> int:
        return sum(int(a.size) for a in self.params.values())


class Encoder(Module):
    def __init__(self, config: ModelConfig, rng: np.random.Generator, dropout_rng):
        super().__init__()
        std = config.init_std
        self.token = Embedding(config.vs, config.hidden, rng, std)
        self.position = Embedding(config.max_len, config.hidden, rng, std)
        self.norm = LayerNorm(config.hidden)
        self.blocks: List[EncoderLayer] = []
        for i in range(config.layers):
            block = EncoderLayer(
                config.hidden,
                config.heads,
                config.hidden * config.ffn_mult,
                config.dropout,
                dropout_rng,
                std,
            )
            setattr(self, f"layer{i}", block)
            self.blocks.append(block)
        self.dropout_rate = config.dropout
        self.rng = dropout_rng

    def __call__(self, ids: np.ndarray, key_bias: np.ndarray) -> Tensor:
        t = ids.shape[1]
        x = self.token(ids) + self.position(np.arange(t))
        x = dropout(self.norm(x), self.dropout_rate, self.rng, self.training)
        for block in self.blocks:
            x = block(x, key_bias)
        return x


class AMTLModel(Module):
    """
    Common encoder with masked-LM, scoring and policy heads.

    Args:
        config: Encoder and head shapes
        vocab: Character vocabulary; ``config.vs`` must equal ``vocab.vs``

    Raises:
        ContractError: If the config and vocabulary disagree on size
    """

    def __init__(self, config: ModelConfig, vocab: Vocab):
        if config.vs != vocab.vs:
            raise ContractError(f"config.vs={config.vs} but vocabulary has {vocab.vs} ids")
        super().__init__()
        self.config = config
        self.vocab = vocab
        rng = np.random.default_rng(config.seed)
        self.dropout_rng = np.random.default_rng([config.seed, 1])
        std = config.init_std
        self.encoder = Encoder(config, rng, self.dropout_rng)
        self.mlm_head = Linear(config.hidden, vocab.n_content, rng, std)
        self.score_head = Linear(config.hidden, 1, rng, std)
        self.policy_start = Linear(config.hidden, 1, rng, std)
        self.policy_end = Linear(config.hidden, 1, rng, std)
        for name, p in self.named_parameters():
            p.name = name

    # Parameter groups

    def encoder_parameters(self) -> List[Tuple[str, Tensor]]:
        return [(n, p) for n, p in self.named_parameters() if n.startswith(ENCODER_PREFIX)]

    def head_parameters(self, *heads: str) -> List[Tuple[str, Tensor]]:
        """Parameters of the named heads (all heads when none given)."""
        prefixes = tuple(h + "." for h in heads) if heads else None
        return [
            (n, p)
            for n, p in self.named_parameters()
            if not n.startswith(ENCODER_PREFIX) and (prefixes is None or n.startswith(prefixes))
        ]

    # Framing

    @property
    def max_tokens(self) -> int:
        """Longest sentence that fits once BOS and EOS are added."""
        return self.config.max_len - 2

    def frame(self, seqs: Sequence[TokenSeq]) -> Tuple[np.ndarray, np.ndarray]:
        """
        Frame and pad a batch.

        Returns:
            ``(ids, key_bias)``: ids of shape (B, T) and an additive attention
            bias of shape (B, 1, 1, T) that hides padding

        Raises:
            LengthError: If a framed sentence exceeds ``max_len``
        """
        if not seqs:
            raise ContractError("empty batch")
        longest = max(s.k for s in seqs)
        if longest + 2 > self.config.max_len:
            raise LengthError(
                f"sentence of length {longest} exceeds max_len {self.config.max_len} with framing"
            )
        t = longest + 2
        ids = np.full((len(seqs), t), PAD_ID, dtype=np.int64)
        bias = np.zeros((len(seqs), 1, 1, t))
        for b, s in enumerate(seqs):
            ids[b, 0] = BOS_ID
            ids[b, 1 : s.k + 1] = s.ids
            ids[b, s.k + 1] = EOS_ID
            bias[b, ..., s.k + 2 :] = NEG_INF
        return ids, bias

    def hidden(self, seqs: Sequence[TokenSeq]) -> Tensor:
        """Encoder output for a framed batch, shape (B, T, hidden)."""
        ids, bias = self.frame(seqs)
        return self.encoder(ids, bias)

    # Heads on hidden states

    def mlm_logits(self, hidden: Tensor) -> Tensor:
        """(B, T, n_content); column j is content id ``j + 4``."""
        h = dropout(hidden, self.config.dropout, self.dropout_rng, self.training)
        return self.mlm_head(h)

    def score_logits(self, hidden: Tensor) -> Tensor:
        """(B, T) raw wrongness logits."""
        b, t, _ = hidden.shape
        return self.score_head(hidden).reshape(b, t)

    def policy_logits(self, hidden: Tensor) -> Tuple[Tensor, Tensor]:
        """(B, T) start and end logits."""
        b, t, _ = hidden.shape
        h = dropout(hidden, self.config.policy_dropout, self.dropout_rng, self.training)
        return self.policy_start(h).reshape(b, t), self.policy_end(h).reshape(b, t)

    # Sentence-level API

    def encode(self, s: TokenSeq) -> np.ndarray:
        """
        Hidden states at content positions, shape (k, hidden).

        Raises:
            LengthError: If ``s`` does not fit ``max_len`` once framed
        """
        with no_grad():
            return self.hidden([s]).data[0, 1 : s.k + 1].copy()

    def mlm_distributions(
        self, seqs: Sequence[TokenSeq], positions: Sequence[Sequence[int]]
    ) -> List[List[CandidateDistribution]]:
        """
        Candidate distributions for several masked positions in one pass.

        Raises:
            ContractError: If a requested position does not hold MASK
        """
        for s, wanted in zip(seqs, positions):
            for p in wanted:
                if not 0 <= p < s.k or s.ids[p] != MASK_ID:
                    raise ContractError(f"position {p} is not masked")
        with no_grad():
            probs = softmax(self.mlm_logits(self.hidden(seqs)), axis=-1).data
        out = []
        for b, wanted in enumerate(positions):
            row = []
            for p in wanted:
                dist = probs[b, p + 1]
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

    def mlm_distribution(self, s: TokenSeq, position: int) -> CandidateDistribution:
        """Candidates for one masked position, best first."""
        return self.mlm_distributions([s], [[position]])[0][0]

    def fill(self, seqs: Sequence[TokenSeq]) -> List[TokenSeq]:
        """Replace every MASK with its argmax candidate, one pass for the batch."""
        needing = [i for i, s in enumerate(seqs) if s.mask_positions()]
        out = list(seqs)
        if not needing:
            return out
        batch = [seqs[i] for i in needing]
        with no_grad():
            logits = self.mlm_logits(self.hidden(batch)).data
        for b, i in enumerate(needing):
            ids = list(batch[b].ids)
            for p in batch[b].mask_positions():
                ids[p] = int(np.argmax(logits[b, p + 1])) + N_SPECIALS
            out[i] = TokenSeq(ids=tuple(ids))
        return out

    def score_batch(self, seqs: Sequence[TokenSeq]) -> List[ScoreVector]:
        """
        Wrongness probabilities for every sentence in the batch.

        Raises:
            ContractError: If any sentence is empty
        """
        if any(s.k == 0 for s in seqs):
            raise ContractError("cannot score an empty sentence")
        with no_grad():
            probs = self.score_logits(self.hidden(seqs)).sigmoid().data
        return [
            ScoreVector(scores=[float(v) for v in probs[b, 1 : s.k + 1]])
            for b, s in enumerate(seqs)
        ]

    def score_tokens(self, s: TokenSeq) -> ScoreVector:
        return self.score_batch([s])[0]

    def policy_batch(self, seqs: Sequence[TokenSeq]) -> List[PolicyOutput]:
        if any(s.k == 0 for s in seqs):
            raise ContractError("cannot locate a span in an empty sentence")
        with no_grad():
            x_s, x_e = self.policy_logits(self.hidden(seqs))
        return [
            PolicyOutput(
                x_s=[float(v) for v in x_s.data[b, 1 : s.k + 1]],
                x_e=[float(v) for v in x_e.data[b, 1 : s.k + 1]],
            )
            for b, s in enumerate(seqs)
        ]

    def policy_spans(self, s: TokenSeq) -> PolicyOutput:
        """Start and end logits over the positions of ``s``."""
        return self.policy_batch([s])[0]

    # State

    def state(self) -> ModelState:
        return ModelState(
            config=self.config,
            vocab=self.vocab,
            params={name: p.data.copy() for name, p in self.named_parameters()},
        )

    def load_state(self, state: ModelState) -> "AMTLModel":
        """
        Copy parameter values from ``state`` into this model.

        Raises:
            ContractError: If names or shapes differ
        """
        own = dict(self.named_parameters())
        if set(own) != set(state.params):
            missing = sorted(set(own) ^ set(state.params))
            raise ContractError(f"parameter names differ: {missing[:5]}")
        for name, p in own.items():
            value = state.params[name]
            if value.shape != p.shape:
                raise ContractError(f"{name}: expected shape {p.shape}, got {value.shape}")
            p.data = np.array(value, dtype=p.data.dtype)
        return self

    @classmethod
    def from_state(cls, state: ModelState) -> "AMTLModel":
        return cls(state.config, state.vocab).load_state(state).eval()


def build_model(vocab: Vocab, config: ModelConfig | None = None) -> AMTLModel:
    """Model sized to ``vocab``; ``config.vs`` is taken from the vocabulary."""
    config = (config or ModelConfig()).model_copy(update={"vs": vocab.vs})
    logger.info(
        "built model",
        extra={"layers": config.layers, "hidden": config.hidden, "vs": config.vs},
    )
    return AMTLModel(config, vocab)

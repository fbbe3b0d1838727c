"""
AMTL Trainer

Runs the training arms over a corpus of clean sentences:

- ``supervised``: random replacements, multi-task loss on every parameter
- ``mtl``: generator replacements, multi-task loss on every parameter
- ``gan``: generator replacements, interlaced adversarial loss on the heads
- ``amtl``: per batch, one multi-task step then one adversarial step

The adversarial step computes encoder states without a graph, so only head
parameters receive gradients and the optimiser leaves the encoder untouched.
"""

import csv
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from amtl.adversarial import build_adversarial_batch, build_random_batch, interlaced_weights_D
from amtl.config import ModelConfig, TrainConfig
from amtl.dataset import header_lines
from amtl.errors import DivergenceError, EmptyCorpusError
from amtl.models import AdversarialBatch, PhaseSchedule, TokenSeq
from amtl.network import AMTLModel, ModelState, build_model
from amtl.objectives import loss_discriminator, loss_generator, loss_mtl
from amtl.optim import AdamW, LinearWarmupDecay, clip_grad_norm
from amtl.tensor import Tensor, no_grad
from amtl.vocab import Vocab

logger = logging.getLogger(__name__)

LOG_COLUMNS = ("epoch", "step", "L_MTL", "L_G", "L_D")


def _positions(per_sentence: Sequence[Sequence[int]]) -> Tuple[np.ndarray, np.ndarray]:
    """Batch and framed-time indices for content positions (BOS shifts by one)."""
    b_idx = [b for b, positions in enumerate(per_sentence) for _ in positions]
    t_idx = [p + 1 for positions in per_sentence for p in positions]
    return np.asarray(b_idx, dtype=np.int64), np.asarray(t_idx, dtype=np.int64)


def _flat(per_sentence: Sequence[Sequence]) -> List:
    return [v for row in per_sentence for v in row]


class Trainer:
    """
    Owns the model, optimiser and random streams for one training run.

    Args:
        model: Model to train in place
        cfg: Training hyperparameters
        total_steps: Batches the schedule spans (warmup and decay)
    """

    def __init__(self, model: AMTLModel, cfg: TrainConfig, total_steps: int):
        self.model = model
        self.cfg = cfg
        self.optimizer = AdamW(model.named_parameters(), cfg.lr, cfg.weight_decay)
        self.schedule = LinearWarmupDecay(
            cfg.lr, total_steps, cfg.warmup_steps, cfg.warmup_fraction
        )
        # Independent streams: batch order and replacement sampling.
        self.order_rng = np.random.default_rng([cfg.seed, 0])
        self.data_rng = np.random.default_rng([cfg.seed, 2])
        self.step = 0
        self.epoch = 0

    # Data

    def make_batch(self, sentences: Sequence[TokenSeq]) -> AdversarialBatch:
        """Replacement data for the configured arm."""
        if self.cfg.phase_schedule == PhaseSchedule.SUPERVISED:
            return build_random_batch(sentences, self.model.vocab, self.cfg, self.data_rng)
        self.model.eval()
        try:
            return build_adversarial_batch(sentences, self.model, self.cfg, self.data_rng)
        finally:
            self.model.train()

    # Steps

    def _apply(self, loss: Tensor, phase: str, losses: Dict[str, float]) -> float:
        value = loss.item()
        if not math.isfinite(value):
            raise DivergenceError(
                f"{phase} loss is {value} at step {self.step}",
                snapshot=self._snapshot(phase, losses | {phase: value}),
            )
        loss.backward()
        clip_grad_norm(self.model.parameters(), self.cfg.grad_clip)
        self.optimizer.step(self.schedule(self.step))
        return value

    def mtl_step(self, batch: AdversarialBatch) -> float:
        """
        One multi-task update of encoder and both LM heads.

        The masked-LM head predicts the originals from the masked sentences;
        the scoring head labels every position of the replaced sentences.
        """
        model = self.model
        model.train()
        self.optimizer.zero_grad()
        mlm = model.mlm_logits(model.hidden(batch.masked))
        score = model.score_logits(model.hidden(batch.sentences))
        mb, mt = _positions(batch.generated)
        sb, st = _positions([range(s.k) for s in batch.sentences])
        loss = loss_mtl(
            mlm[mb, mt],
            _flat(batch.original_ids),
            score[sb, st],
            np.asarray(_flat(batch.labels), dtype=np.float64),
        ) * (1.0 / len(batch))
        return self._apply(loss, "L_MTL", {})

    def discriminator_probs(self, batch: AdversarialBatch) -> Tuple[np.ndarray, np.ndarray]:
        """Dropout-free wrongness probabilities of the generated and original sentences."""
        model = self.model
        model.eval()
        try:
            with no_grad():
                generated = model.score_logits(model.hidden(batch.sentences)).sigmoid().data
                original = model.score_logits(model.hidden(batch.originals)).sigmoid().data
        finally:
            model.train()
        return generated, original

    def adversarial_step(self, batch: AdversarialBatch) -> Tuple[float, float]:
        """
        One interlaced update of the masked-LM and scoring heads.

        Returns:
            ``(L_G, L_D)`` averaged over the batch
        """
        model = self.model
        p_generated, p_original = self.discriminator_probs(batch)
        self.optimizer.zero_grad()
        with no_grad():
            h_masked = model.hidden(batch.masked)
            h_generated = model.hidden(batch.sentences)
        mb, mt = _positions(batch.generated)
        w_d = interlaced_weights_D(p_generated[mb, mt], p_original[mb, mt])
        l_g = loss_generator(
            model.mlm_logits(h_masked)[mb, mt], _flat(batch.original_ids), w_d
        ) * (1.0 / len(batch))

        score = model.score_logits(h_generated)
        l_d = Tensor(0.0)
        for b, sentence in enumerate(batch.sentences):
            l_d = l_d + loss_discriminator(
                score[b, 1 : sentence.k + 1],
                np.asarray(batch.labels[b], dtype=np.float64),
                np.asarray(batch.w_g[b], dtype=np.float64),
                batch.generated[b],
                batch.original[b],
                self.cfg.ratio_post_sigmoid,
            )
        l_d = l_d * (1.0 / len(batch))
        l_g_value, l_d_value = l_g.item(), l_d.item()
        self._apply(l_g + l_d, "L_G+L_D", {"L_G": l_g_value, "L_D": l_d_value})
        return l_g_value, l_d_value

    def train_batch(self, sentences: Sequence[TokenSeq]) -> Dict[str, float]:
        """Run the configured arm on one batch of clean sentences."""
        self.step += 1
        batch = self.make_batch(sentences)
        if len(batch) == 0:
            return {}
        phase = self.cfg.phase_schedule
        losses: Dict[str, float] = {}
        if phase in (PhaseSchedule.SUPERVISED, PhaseSchedule.MTL, PhaseSchedule.AMTL):
            losses["L_MTL"] = self.mtl_step(batch)
        if phase in (PhaseSchedule.GAN, PhaseSchedule.AMTL):
            losses["L_G"], losses["L_D"] = self.adversarial_step(batch)
        return losses

    def train_epoch(self, corpus: Sequence[TokenSeq]) -> Dict[str, object]:
        """One shuffled pass; returns the epoch row of the training log."""
        self.epoch += 1
        order = self.order_rng.permutation(len(corpus))
        sums: Dict[str, float] = {}
        counts: Dict[str, int] = {}
        for start in range(0, len(corpus), self.cfg.batch):
            chunk = [corpus[i] for i in order[start : start + self.cfg.batch]]
            for name, value in self.train_batch(chunk).items():
                sums[name] = sums.get(name, 0.0) + value
                counts[name] = counts.get(name, 0) + 1
        row: Dict[str, object] = {"epoch": self.epoch, "step": self.step}
        for name in LOG_COLUMNS[2:]:
            row[name] = sums[name] / counts[name] if name in counts else None
        logger.info("epoch finished", extra={k: v for k, v in row.items() if v is not None})
        return row

    def _snapshot(self, phase: str, losses: Dict[str, float]) -> Dict[str, object]:
        norms = {n: float(np.abs(p.data).max()) for n, p in self.model.named_parameters()}
        worst = max(norms, key=norms.get)
        return {
            "epoch": self.epoch,
            "step": self.step,
            "phase": phase,
            "lr": self.schedule(self.step),
            "losses": losses,
            "largest_param": worst,
            "largest_abs_value": norms[worst],
        }


def total_steps(n_sentences: int, cfg: TrainConfig) -> int:
    return cfg.epochs * math.ceil(n_sentences / cfg.batch)


def fit(model: AMTLModel, corpus: Sequence[TokenSeq], cfg: TrainConfig) -> List[Dict[str, object]]:
    """
    Train ``model`` in place for ``cfg.epochs`` epochs.

    Returns:
        One training-log row per epoch

    Raises:
        EmptyCorpusError: If ``corpus`` is empty
        DivergenceError: If a loss becomes non-finite
    """
    if not corpus:
        raise EmptyCorpusError("cannot train on an empty corpus")
    trainer = Trainer(model, cfg, total_steps(len(corpus), cfg))
    logger.info(
        "training",
        extra={
            "phase": cfg.phase_schedule.value,
            "sentences": len(corpus),
            "steps": trainer.schedule.total,
            "warmup": trainer.schedule.warmup,
        },
    )
    history = [trainer.train_epoch(corpus) for _ in range(cfg.epochs)]
    model.eval()
    return history


def train(
    corpus: Sequence[TokenSeq],
    cfg: TrainConfig,
    model_config: Optional[ModelConfig] = None,
    vocab: Optional[Vocab] = None,
) -> ModelState:
    """Build a fresh model, train it, and return its final state."""
    model = build_model(vocab or Vocab.toy(), model_config)
    fit(model, corpus, cfg)
    return model.state()


def _cell(value: object) -> object:
    if value is None:
        return ""
    return f"{value:.6f}" if isinstance(value, float) else value


def write_training_log(
    path: str | Path, rows: Sequence[Dict[str, object]], config_lines: Sequence[str] = ()
) -> None:
    """CSV ``epoch,step,L_MTL,L_G,L_D`` under ``#!amtl`` header lines; blank = not run."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in header_lines(config_lines):
            fh.write(line + "\n")
        writer = csv.DictWriter(fh, fieldnames=LOG_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(row.get(k)) for k in LOG_COLUMNS})

"""
Unit Tests for the trainer

Tiny models and a handful of sentences; each arm is checked for which
parameters it is allowed to move.
"""

import numpy as np
import pytest

from amtl.errors import DivergenceError, EmptyCorpusError
from amtl.optim import frozen_copy
from amtl.trainer import LOG_COLUMNS, Trainer, fit, total_steps, train, write_training_log
from tests.mock_data import MockDataGenerator


def _changed(before, model):
    return {n for n, p in model.named_parameters() if not np.array_equal(before[n], p.data)}


class TestArms:
    """Test what each arm updates."""

    @pytest.fixture
    def corpus(self):
        return MockDataGenerator.corpus(n=8, seed=1)

    def _run(self, phase, corpus):
        model = MockDataGenerator.tiny_model(seed=3)
        before = frozen_copy(model.named_parameters())
        cfg = MockDataGenerator.tiny_train_config(phase_schedule=phase)
        losses = Trainer(model, cfg, total_steps=4).train_batch(corpus)
        return losses, _changed(before, model)

    def test_gan_keeps_encoder_frozen(self, corpus):
        """Test the adversarial arm only moves the masked-LM and scoring heads."""
        losses, changed = self._run("gan", corpus)
        assert set(losses) == {"L_G", "L_D"}
        assert changed
        assert {n.split(".")[0] for n in changed} <= {"mlm_head", "score_head"}

    def test_mtl_moves_encoder(self, corpus):
        """Test the multi-task arm trains the encoder too."""
        losses, changed = self._run("mtl", corpus)
        assert set(losses) == {"L_MTL"}
        assert any(n.startswith("encoder.") for n in changed)

    def test_amtl_runs_both_phases(self, corpus):
        """Test the combined arm reports all three losses."""
        losses, _ = self._run("amtl", corpus)
        assert set(losses) == {"L_MTL", "L_G", "L_D"}
        assert all(np.isfinite(v) for v in losses.values())

    def test_policy_heads_untouched(self, corpus):
        """Test no training arm moves the policy heads."""
        for phase in ("supervised", "mtl", "gan", "amtl"):
            _, changed = self._run(phase, corpus)
            assert not any(n.startswith("policy_") for n in changed)

    def test_discriminator_probs_without_dropout(self, corpus):
        """Test the W_D probabilities come from a dropout-free pass and training resumes."""
        model = MockDataGenerator.tiny_model(seed=3, dropout=0.5)
        trainer = Trainer(model, MockDataGenerator.tiny_train_config(), total_steps=4)
        batch = trainer.make_batch(corpus)
        first, _ = trainer.discriminator_probs(batch)
        second, original = trainer.discriminator_probs(batch)
        assert model.training
        np.testing.assert_array_equal(first, second)
        model.eval()
        expected = model.score_logits(model.hidden(batch.originals)).sigmoid().data
        np.testing.assert_array_equal(original, expected)


class TestDivergence:
    """Test non-finite losses stop training."""

    def test_nan_loss(self):
        """Test a NaN loss raises with a diagnostic snapshot."""
        model = MockDataGenerator.tiny_model()
        model.score_head.weight.data[:] = np.nan
        cfg = MockDataGenerator.tiny_train_config(phase_schedule="supervised")
        trainer = Trainer(model, cfg, total_steps=1)
        with pytest.raises(DivergenceError) as info:
            trainer.train_batch(MockDataGenerator.corpus(n=2))
        assert info.value.snapshot["phase"] == "L_MTL"
        assert info.value.snapshot["step"] == 1


class TestFit:
    """Test full runs and the training log."""

    def test_total_steps(self):
        """Test steps are epochs times batches per epoch."""
        cfg = MockDataGenerator.tiny_train_config(epochs=2, batch=8)
        assert total_steps(20, cfg) == 6

    def test_empty_corpus(self):
        """Test training needs sentences."""
        with pytest.raises(EmptyCorpusError):
            fit(MockDataGenerator.tiny_model(), [], MockDataGenerator.tiny_train_config())

    def test_history_rows(self):
        """Test one row per epoch, blank where an objective did not run."""
        cfg = MockDataGenerator.tiny_train_config(epochs=2, phase_schedule="supervised")
        history = fit(MockDataGenerator.tiny_model(), MockDataGenerator.corpus(n=10), cfg)
        assert [row["epoch"] for row in history] == [1, 2]
        assert [row["step"] for row in history] == [2, 4]
        assert history[0]["L_G"] is None and history[0]["L_MTL"] is not None

    def test_reproducible(self):
        """Test the same seed and data give the same weights."""
        corpus = MockDataGenerator.corpus(n=8)
        cfg = MockDataGenerator.tiny_train_config()
        model_config = MockDataGenerator.tiny_model_config(seed=4)
        a = train(corpus, cfg, model_config)
        b = train(corpus, cfg, model_config)
        for name, value in a.params.items():
            np.testing.assert_array_equal(value, b.params[name])

    def test_write_training_log(self, tmp_path):
        """Test the CSV layout under its header lines."""
        path = tmp_path / "train.log"
        rows = [{"epoch": 1, "step": 4, "L_MTL": 0.5, "L_G": None, "L_D": None}]
        write_training_log(path, rows, ["train.seed=0"])
        assert path.read_text(encoding="utf-8").splitlines() == [
            "#!amtl format_version=1",
            "#!amtl train.seed=0",
            ",".join(LOG_COLUMNS),
            "1,4,0.500000,,",
        ]

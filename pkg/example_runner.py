"""
Example AMTL Pipeline Runner

Demonstrates the complete end-to-end AMTL pipeline on a small model:
1. Generate a toy-language corpus and corrupt held-out sentences
2. Train the shared encoder with its masked-LM and scoring heads
3. Correct sentences with the full mask-fill-rescore search
4. Train the span policy and correct again with the fast path
5. Evaluate on the held-out sentences

The correction code only talks to the models through plugin hooks, so the
same search runs on the trained network or on the bigram baseline.
"""

from amtl import PluginManager
from amtl.config import (
    CorrectorConfig,
    EvalConfig,
    ModelConfig,
    PolicyConfig,
    RunConfig,
    TrainConfig,
)
from amtl.correction import Corrector, explain
from amtl.corruption import inject_errors
from amtl.dataset import split_holdout
from amtl.evaluation import format_table, run_evaluation
from amtl.grammar import generate_corpus
from amtl.network import build_model
from amtl.plugins.bigram_lm import BigramLMPlugin
from amtl.policy import train_policy
from amtl.trainer import fit
from amtl.vocab import Vocab
from pipeline import build_plugin_manager


def main():
    """Run the example pipeline end to end."""
    vocab = Vocab.toy()
    config = RunConfig(
        model=ModelConfig(layers=1, hidden=32, heads=2, max_len=40, seed=0),
        train=TrainConfig(epochs=2, batch=16, lr=1e-3, warmup_steps=10, seed=0),
        corrector=CorrectorConfig(width=2, depth=4),
        policy=PolicyConfig(samples=300, epochs=3, batch=16),
        eval=EvalConfig(samples=50),
    )

    print("=== DATA ===")
    corpus = generate_corpus(config.train.seed, 1000, vocab)
    train_set, held_out = split_holdout(corpus, 0.1, config.train.seed)
    print(f"Generated {len(corpus)} sentences ({len(held_out)} held out)")
    records = [inject_errors(s, seed=i, vocab=vocab) for i, s in enumerate(held_out[:5])]
    for r in records:
        print(f"   {vocab.decode(r.clean):<34} -> {vocab.decode(r.corrupted)}")

    print("\n=== BASELINE: BIGRAM SEARCH ===")
    pm = PluginManager()
    pm.register_plugin(BigramLMPlugin.fit(train_set, vocab), name="bigram_lm")
    corrector = Corrector(pm, config.corrector)
    for r in records:
        trace = corrector.search(r.corrupted)
        print(f"   {vocab.decode(trace.best.filled):<34} {explain(trace)}")

    print("\n=== TRAINING (amtl arm) ===")
    model = build_model(vocab, config.model)
    for row in fit(model, train_set, config.train):
        print(f"   epoch {row['epoch']}: L_MTL={row['L_MTL']:.4f} L_G={row['L_G']:.4f}")

    print("\n=== FULL SEARCH ===")
    corrector = Corrector(build_plugin_manager(model), config.corrector)
    for r in records:
        trace = corrector.search(r.corrupted)
        status = "✓" if trace.best.filled == r.clean else "✗"
        print(f"   {status} {vocab.decode(trace.best.filled):<34} {explain(trace)}")

    print("\n=== POLICY FAST PATH ===")
    train_policy(train_set, model, config.policy, corrector)
    for r in records:
        trace = corrector.search_fast(r.corrupted)
        print(f"   {vocab.decode(trace.best.filled):<34} {explain(trace)}")

    print("\n=== EVALUATION ===")
    report = run_evaluation(held_out, build_plugin_manager(model), config, vocab, fast=True)
    print(format_table(report))


if __name__ == "__main__":
    main()

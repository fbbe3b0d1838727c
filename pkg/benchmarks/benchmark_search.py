"""
Search and Sampler Benchmarks for AMTL

Measures the rank sampler against its closed form, and the cost of the full
mask-fill-rescore search against the policy-guided fast path.
Run with: python benchmarks/benchmark_search.py
"""

import math
import time

import numpy as np
from scipy import stats

from amtl import PluginManager
from amtl.adversarial import sample_candidate_rank
from amtl.config import CorrectorConfig, ModelConfig, PolicyConfig, TrainConfig
from amtl.correction import Corrector
from amtl.corruption import inject_errors
from amtl.grammar import generate_corpus
from amtl.network import build_model
from amtl.plugins.bigram_lm import BigramLMPlugin
from amtl.policy import train_policy
from amtl.trainer import fit
from amtl.vocab import Vocab
from pipeline import build_plugin_manager

RANK_BINS = [1, 2, 3, 5, 10, 20, 50, 100, 200, 500, 1001]


def benchmark_rank_sampler(draws=100_000, ct=1000.0):
    """Share of ranks below 20 and a chi-square test of the log-uniform law."""
    rng = np.random.default_rng(0)
    start = time.perf_counter()
    ranks = np.array([sample_candidate_rank(rng, ct) for _ in range(draws)])
    elapsed = time.perf_counter() - start

    observed, _ = np.histogram(ranks, bins=RANK_BINS)
    edges = np.array(RANK_BINS, dtype=np.float64)
    # P(rank < r) = ln r / ln Ct; the last edge is past Ct.
    cdf = np.log(edges) / math.log(ct)
    cdf[-1] = 1.0
    expected = np.diff(cdf) * draws
    _, p_value = stats.chisquare(observed, expected)

    print("\n📊 Rank Sampler Benchmark:")
    print(f"   Draws: {draws:,}")
    closed_form = math.log(20) / math.log(ct)
    print(f"   Share below 20: {np.mean(ranks < 20):.4f} (closed form {closed_form:.4f})")
    print(f"   Chi-square p-value: {p_value:.3f}")
    print(f"   Throughput: {draws / elapsed:.0f} draws/sec")


def benchmark_bigram_search(num_sentences=200):
    """Full search driven by the count-based baseline."""
    corpus = generate_corpus(seed=1, n=2000)
    vocab = Vocab.toy()
    pm = PluginManager()
    pm.register_plugin(BigramLMPlugin.fit(corpus, vocab), name="bigram_lm")
    corrector = Corrector(pm, CorrectorConfig())
    wrongs = [inject_errors(s, seed=i, vocab=vocab) for i, s in enumerate(corpus[:num_sentences])]

    start = time.perf_counter()
    restored = sum(corrector.correct(r.corrupted) == r.clean for r in wrongs)
    elapsed = time.perf_counter() - start

    print("\n📊 Bigram Search Benchmark:")
    print(f"   Sentences: {num_sentences:,}")
    print(f"   Exactly restored: {restored / num_sentences:.1%}")
    print(f"   Throughput: {num_sentences / elapsed:.1f} sentences/sec")


def benchmark_fast_path(num_sentences=100):
    """Forward passes and agreement of the fast path against the full search."""
    corpus = generate_corpus(seed=2, n=400)
    model = build_model(Vocab.toy(), ModelConfig(layers=1, hidden=32, heads=2, seed=2))
    fit(model, corpus, TrainConfig(epochs=2, batch=16, lr=1e-3, warmup_steps=5, seed=2))
    train_policy(corpus, model, PolicyConfig(samples=200, epochs=3, batch=16))
    corrector = Corrector(build_plugin_manager(model), CorrectorConfig())
    wrongs = [
        inject_errors(s, seed=i, vocab=model.vocab).corrupted
        for i, s in enumerate(corpus[:num_sentences])
    ]

    timings, passes, agree = {}, {"full": [], "fast": []}, 0
    for name, search in (("full", corrector.search), ("fast", corrector.search_fast)):
        start = time.perf_counter()
        traces = [search(w) for w in wrongs]
        timings[name] = time.perf_counter() - start
        passes[name] = [t.forward_passes for t in traces]
        if name == "full":
            full_best = [t.best.filled for t in traces]
        else:
            agree = sum(t.best.filled == b for t, b in zip(traces, full_best))

    print("\n📊 Fast Path Benchmark:")
    print(f"   Sentences: {num_sentences:,}")
    full, fast = np.mean(passes["full"]), np.mean(passes["fast"])
    print(f"   Mean passes: full {full:.1f}, fast {fast:.1f}")
    print(f"   Speedup: {timings['full'] / timings['fast']:.1f}x")
    print(f"   Agreement with full search: {agree / num_sentences:.1%}")


def main():
    """Run all search benchmarks."""
    print("=" * 60)
    print("AMTL Search Benchmarks")
    print("=" * 60)
    print("\nRunning benchmarks... (this may take a few minutes)\n")

    benchmark_rank_sampler()
    benchmark_bigram_search()
    benchmark_fast_path()

    print("\n" + "=" * 60)
    print("✅ All benchmarks complete!")
    print("=" * 60)


if __name__ == "__main__":
    main()

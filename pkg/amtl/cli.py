"""
AMTL command line.

Usage:
    amtl gen-corpus --n 20000 --out corpus.txt
    amtl train --phase amtl --out model.amtl
    amtl train-policy --model model.amtl --out policy.amtl
    amtl correct --model model.amtl [--fast --policy policy.amtl] [--explain] < wrong.txt
    amtl eval --model model.amtl [--fast --policy policy.amtl] --out report.txt

Exit codes: 0 success, 1 usage error, 2 configuration error, 3 runtime failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from amtl import checkpoint
from amtl.config import RunConfig, load_config, parse_key_values
from amtl.correction import Corrector, explain
from amtl.corruption import inject_errors
from amtl.dataset import (
    encode_corpus,
    read_sentences,
    split_holdout,
    write_pairs,
    write_sentences,
)
from amtl.errors import AMTLError, ConfigError
from amtl.evaluation import format_table, run_evaluation, write_report
from amtl.grammar import generate_corpus, generate_sentences
from amtl.log import configure_logging
from amtl.models import TokenSeq
from amtl.network import build_model
from amtl.policy import fit_policy, generate_supervision, write_supervision
from amtl.trainer import fit, write_training_log
from amtl.vocab import TOY_CHARS, Vocab
from pipeline import build_plugin_manager

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

SEED_KEYS = ("model.seed", "train.seed", "policy.seed", "eval.seed")


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key=value config file")
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Config override (repeatable), e.g. --set train.lr=0.001",
    )
    common.add_argument("--seed", type=int, help="Seed for every random stream")
    common.add_argument("--log-level", help="Logging level (default: AMTL_LOG_LEVEL or WARNING)")
    common.add_argument("--log-json", action="store_true", help="Log one JSON object per line")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(
        prog="amtl",
        description="Adversarial multi-task text correction",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    verbs = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    gen = verbs.add_parser("gen-corpus", parents=[common], help="Generate toy-language sentences")
    gen.add_argument("--n", type=int, help="Sentences to generate (default: train.corpus_size)")
    gen.add_argument("--out", type=Path, required=True)
    gen.add_argument(
        "--pairs", action="store_true", help="Write corrupted/clean pair records instead"
    )

    train = verbs.add_parser("train", parents=[common], help="Train encoder and LM heads")
    train.add_argument("--data", type=Path, help="Sentence file (default: generated corpus)")
    train.add_argument("--phase", help="supervised, mtl, gan or amtl")
    train.add_argument("--holdout", type=float, help="Held-out share of the corpus")
    train.add_argument("--out", type=Path, required=True, help="Checkpoint to write")

    policy = verbs.add_parser("train-policy", parents=[common], help="Train the span policy")
    policy.add_argument("--model", type=Path, required=True)
    policy.add_argument("--data", type=Path, help="Sentence file (default: generated corpus)")
    policy.add_argument("--cache", type=Path, help="Also write the supervision records here")
    policy.add_argument("--out", type=Path, required=True, help="Checkpoint to write")

    correct = verbs.add_parser("correct", parents=[common], help="Correct sentences")
    correct.add_argument(
        "input", nargs="?", type=Path, help="One sentence per line (default: stdin)"
    )
    _model_flags(correct)
    correct.add_argument("--explain", action="store_true", help="Append the chosen edit")
    correct.add_argument("--width", type=int)
    correct.add_argument("--depth", type=int)
    correct.add_argument("--out", type=Path, help="Output file (default: stdout)")

    ev = verbs.add_parser("eval", parents=[common], help="Evaluate on held-out sentences")
    _model_flags(ev)
    ev.add_argument("--data", type=Path, help="Held-out sentences (default: <model>.heldout)")
    ev.add_argument("--topk", type=int)
    ev.add_argument("--multi-span", type=int, help="Corruptions per sentence")
    ev.add_argument("--width", type=int)
    ev.add_argument("--depth", type=int)
    ev.add_argument("--out", type=Path, help="key=value report file")
    return parser


def _model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", type=Path, required=True, help="Checkpoint")
    parser.add_argument("--policy", type=Path, help="Policy checkpoint (default: --model)")
    parser.add_argument("--fast", action="store_true", help="Use the policy-guided search")


def _overrides(args: argparse.Namespace) -> Dict[str, object]:
    overrides: Dict[str, object] = {}
    for item in args.overrides:
        overrides.update(parse_key_values(item, origin="--set"))
    if args.seed is not None:
        overrides.update({key: args.seed for key in SEED_KEYS})
    flags = {
        "phase": "train.phase_schedule",
        "holdout": "train.holdout",
        "topk": "eval.topk",
        "multi_span": "eval.multi_span",
        "width": "corrector.width",
        "depth": "corrector.depth",
    }
    for attr, key in flags.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    return overrides


def _vocab_for(sentences: Sequence[str]) -> Vocab:
    """Toy vocabulary when it covers the text, else one built from the text."""
    if set("".join(sentences)) <= set(TOY_CHARS):
        return Vocab.toy()
    return encode_corpus(sentences)[0]


def _corpus(args: argparse.Namespace, cfg: RunConfig) -> Tuple[Vocab, List[TokenSeq]]:
    if args.data is None:
        return Vocab.toy(), generate_corpus(cfg.train.seed, cfg.train.corpus_size)
    sentences = read_sentences(args.data)
    vocab = _vocab_for(sentences)
    return vocab, [vocab.encode(s) for s in sentences]


def _artifact(path: Path, suffix: str) -> Path:
    return path.with_name(path.name + suffix)


def cmd_gen_corpus(args: argparse.Namespace, cfg: RunConfig, lines: List[str]) -> int:
    n = args.n if args.n is not None else cfg.train.corpus_size
    sentences = generate_sentences(cfg.train.seed, n)
    if not args.pairs:
        write_sentences(args.out, sentences, lines)
        return EXIT_OK
    vocab = Vocab.toy()
    rng = np.random.default_rng([cfg.train.seed, 6])
    records = [inject_errors(vocab.encode(s), rng, vocab) for s in sentences]
    write_pairs(args.out, records, vocab, lines)
    return EXIT_OK


def cmd_train(args: argparse.Namespace, cfg: RunConfig, lines: List[str]) -> int:
    vocab, corpus = _corpus(args, cfg)
    train_set, held_out = split_holdout(corpus, cfg.train.holdout, cfg.train.seed)
    model = build_model(vocab, cfg.model)
    history = fit(model, train_set, cfg.train)
    checkpoint.save(model, args.out, lines)
    write_training_log(_artifact(args.out, ".log.csv"), history, lines)
    if held_out:
        write_sentences(
            _artifact(args.out, ".heldout"), [vocab.decode(s) for s in held_out], lines
        )
        report = run_evaluation(held_out, build_plugin_manager(model), cfg, vocab)
        write_report(report, _artifact(args.out, ".metrics"), lines)
    return EXIT_OK


def cmd_train_policy(args: argparse.Namespace, cfg: RunConfig, lines: List[str]) -> int:
    model = checkpoint.load_model(args.model)
    if args.data is None:
        corpus = generate_corpus(cfg.train.seed, cfg.train.corpus_size, model.vocab)
        corpus, _ = split_holdout(corpus, cfg.train.holdout, cfg.train.seed)
    else:
        corpus = [model.vocab.encode(s) for s in read_sentences(args.data)]
    corrector = Corrector(build_plugin_manager(model), cfg.corrector)
    samples, skipped = generate_supervision(corpus, cfg.policy, model.vocab, corrector)
    if args.cache is not None:
        write_supervision(args.cache, samples, model.vocab, lines)
    fit_policy(model, samples, cfg.policy)
    checkpoint.save(model, args.out, lines)
    logger.info("policy trained", extra={"samples": len(samples), "skipped": skipped})
    return EXIT_OK


def _plugin_manager(args: argparse.Namespace):
    model = checkpoint.load_model(args.model)
    policy_model = checkpoint.load_model(args.policy) if args.policy else None
    return model, build_plugin_manager(model, policy_model)


def _read_lines(source: Optional[Path], stdin: TextIO) -> List[str]:
    if source is None:
        return stdin.read().splitlines()
    return Path(source).read_text(encoding="utf-8").splitlines()


def cmd_correct(
    args: argparse.Namespace, cfg: RunConfig, lines: List[str], stdin: TextIO, stdout: TextIO
) -> int:
    texts = _read_lines(args.input, stdin)
    if not texts:
        return EXIT_OK
    model, pm = _plugin_manager(args)
    corrector = Corrector(pm, cfg.corrector)
    out = []
    for text in texts:
        if not text:
            out.append("")
            continue
        traces = corrector.trace_rounds(model.vocab.encode(text), fast=args.fast)
        line = model.vocab.decode(traces[-1].best.filled)
        if args.explain:
            line += "\t" + ";".join(explain(t) for t in traces)
        out.append(line)
    result = "\n".join(out) + "\n"
    if args.out is None:
        stdout.write(result)
    else:
        Path(args.out).write_text(result, encoding="utf-8")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, cfg: RunConfig, lines: List[str], stdout: TextIO) -> int:
    model, pm = _plugin_manager(args)
    data = args.data or _artifact(args.model, ".heldout")
    if data.exists():
        held_out = [model.vocab.encode(s) for s in read_sentences(data)]
    else:
        corpus = generate_corpus(cfg.train.seed, cfg.train.corpus_size, model.vocab)
        _, held_out = split_holdout(corpus, cfg.train.holdout, cfg.train.seed)
    report = run_evaluation(held_out, pm, cfg, model.vocab, fast=args.fast)
    stdout.write(format_table(report) + "\n")
    if args.out is not None:
        write_report(report, args.out, lines)
    return EXIT_OK


def run(
    argv: Optional[Sequence[str]] = None,
    stdin: Optional[TextIO] = None,
    stdout: Optional[TextIO] = None,
) -> int:
    """
    Parse ``argv`` and run one verb.

    Returns:
        Process exit code
    """
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code is None else int(e.code)
    configure_logging(args.log_level, as_json=args.log_json)

    try:
        cfg = load_config(args.config, _overrides(args))
    except ConfigError as e:
        print(f"amtl: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    lines = cfg.resolved_lines()
    logger.info("resolved config", extra={"verb": args.verb, "config": ";".join(lines)})

    try:
        if args.verb == "gen-corpus":
            return cmd_gen_corpus(args, cfg, lines)
        if args.verb == "train":
            return cmd_train(args, cfg, lines)
        if args.verb == "train-policy":
            return cmd_train_policy(args, cfg, lines)
        if args.verb == "correct":
            return cmd_correct(args, cfg, lines, stdin, stdout)
        return cmd_eval(args, cfg, lines, stdout)
    except ConfigError as e:
        print(f"amtl: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (AMTLError, OSError, RuntimeError) as e:
        print(f"amtl: {args.verb} failed: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    """Console entry point."""
    sys.exit(run())


if __name__ == "__main__":
    main()

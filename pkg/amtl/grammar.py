"""
Synthetic character-level language.

Sentences are one to three clauses joined by conjunction digits. A clause is
a subject, an optional adverb and a predicate whose verb class fixes the
kind of object it takes: motion verbs take places, eating verbs take food,
making verbs take tools (and only people make things). Lexemes are one to
three characters drawn from the toy vocabulary.

The same tables drive the sampler and the membership oracle, so every
generated sentence is grammatical by construction and ``is_grammatical``
decides membership exactly.
"""

import re
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np

from amtl.errors import EmptyCorpusError
from amtl.models import TokenSeq
from amtl.vocab import Vocab

MIN_LEN = 6
MAX_LEN = 32

LEXICON: Dict[str, Tuple[str, ...]] = {
    "PERSON": ("Ka", "Mo", "Tel", "Ru", "Bix", "Zan", "Pe", "Lo"),
    "ANIMAL": ("Gu", "Fy", "Wox", "Hib", "Jem"),
    "PLACE": ("dor", "vin", "hus", "gat", "lom", "sek", "rav"),
    "FOOD": ("pa", "mi", "tuk", "rel", "oz"),
    "TOOL": ("xo", "qen", "jub", "cav", "yl"),
    "MOTION": ("D", "Aw", "Yr"),
    "EAT": ("N", "Eb"),
    "MAKE": ("V", "Qi", "Sd"),
    "SEE": ("O", "Uh"),
    "ADV": ("C", "Xe", "I"),
    "ADJ_PLACE": ("fi", "w"),
    "ADJ_FOOD": ("e", "ya"),
    "ADJ_TOOL": ("b", "nu"),
    "NUM": ("2", "3", "4", "5", "6", "7"),
    "CONJ": ("0", "1"),
}
LEXICON["SEEN_BY_PERSON"] = LEXICON["PERSON"] + LEXICON["ANIMAL"] + LEXICON["TOOL"]
LEXICON["SEEN_BY_ANIMAL"] = LEXICON["PERSON"] + LEXICON["ANIMAL"]

# (subject category, predicate symbols); a trailing "?" marks an optional slot.
TEMPLATES: Tuple[Tuple[str, Tuple[str, ...]], ...] = (
    ("PERSON", ("MOTION", "ADJ_PLACE?", "PLACE")),
    ("PERSON", ("EAT", "NUM?", "ADJ_FOOD?", "FOOD")),
    ("PERSON", ("MAKE", "NUM?", "ADJ_TOOL?", "TOOL")),
    ("PERSON", ("SEE", "SEEN_BY_PERSON")),
    ("ANIMAL", ("MOTION", "ADJ_PLACE?", "PLACE")),
    ("ANIMAL", ("EAT", "NUM?", "ADJ_FOOD?", "FOOD")),
    ("ANIMAL", ("SEE", "SEEN_BY_ANIMAL")),
)

OPTIONAL_P = 0.4
CLAUSE_COUNT_P = (0.4, 0.4, 0.2)


def _alternation(category: str) -> str:
    lexemes = sorted(LEXICON[category], key=len, reverse=True)
    return "(?:" + "|".join(re.escape(x) for x in lexemes) + ")"


def _slot_pattern(slot: str) -> str:
    if slot.endswith("?"):
        return _alternation(slot[:-1]) + "?"
    return _alternation(slot)


@lru_cache(maxsize=1)
def _sentence_pattern() -> re.Pattern:
    clauses = []
    for subject, predicate in TEMPLATES:
        parts = [_alternation(subject), _alternation("ADV") + "?"]
        parts += [_slot_pattern(slot) for slot in predicate]
        clauses.append("".join(parts))
    clause = "(?:" + "|".join(clauses) + ")"
    conj = _alternation("CONJ")
    return re.compile(f"{clause}(?:{conj}{clause}){{0,2}}")


def is_grammatical(text: str) -> bool:
    """Exact membership test for the toy language, including the length bound."""
    if not MIN_LEN <= len(text) <= MAX_LEN:
        return False
    return _sentence_pattern().fullmatch(text) is not None


def _pick(rng: np.random.Generator, options: Tuple[str, ...]) -> str:
    return options[int(rng.integers(len(options)))]


def _sample_clause(rng: np.random.Generator) -> str:
    subject, predicate = TEMPLATES[int(rng.integers(len(TEMPLATES)))]
    parts = [_pick(rng, LEXICON[subject])]
    if rng.random() < OPTIONAL_P:
        parts.append(_pick(rng, LEXICON["ADV"]))
    for slot in predicate:
        if slot.endswith("?"):
            if rng.random() < OPTIONAL_P:
                parts.append(_pick(rng, LEXICON[slot[:-1]]))
        else:
            parts.append(_pick(rng, LEXICON[slot]))
    return "".join(parts)


def sample_sentence(rng: np.random.Generator) -> str:
    """Draw one sentence, resampling until it fits the length bound."""
    while True:
        n_clauses = 1 + int(rng.choice(len(CLAUSE_COUNT_P), p=CLAUSE_COUNT_P))
        clauses = [_sample_clause(rng) for _ in range(n_clauses)]
        text = clauses[0]
        for clause in clauses[1:]:
            text += _pick(rng, LEXICON["CONJ"]) + clause
        if MIN_LEN <= len(text) <= MAX_LEN:
            return text


def generate_sentences(seed: int, n: int) -> List[str]:
    """
    Generate ``n`` sentences; a pure function of ``(seed, n)``.

    Raises:
        EmptyCorpusError: If ``n`` is zero
    """
    if n < 1:
        raise EmptyCorpusError("corpus size must be at least 1")
    rng = np.random.default_rng(seed)
    return [sample_sentence(rng) for _ in range(n)]


def generate_corpus(seed: int, n: int, vocab: Optional[Vocab] = None) -> List[TokenSeq]:
    """Generate and encode ``n`` sentences with the toy vocabulary."""
    vocab = vocab or Vocab.toy()
    return [vocab.encode(text) for text in generate_sentences(seed, n)]

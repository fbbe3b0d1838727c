"""
Character vocabulary.

Ids 0..3 are the specials (PAD, MASK, BOS, EOS); content characters follow
in the order given. ``Vocab.toy()`` is the 60-character alphabet of the
synthetic language; ``Vocab.from_texts`` builds one from arbitrary UTF-8
text so real sentences can be dropped in.
"""

from typing import Iterable, List, Sequence

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator

from amtl.errors import ContractError, UnknownSymbolError
from amtl.models import BOS_ID, EOS_ID, MASK_ID, N_SPECIALS, PAD_ID, TokenSeq

TOY_CHARS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ01234567"

SPECIAL_SYMBOLS = {PAD_ID: "<pad>", MASK_ID: "<mask>", BOS_ID: "<bos>", EOS_ID: "<eos>"}


class Vocab(BaseModel):
    """Character-to-id table with reserved specials."""

    model_config = ConfigDict(frozen=True)

    chars: List[str] = Field(..., description="Content characters, id order")

    @field_validator("chars")
    @classmethod
    def _single_unique_chars(cls, chars: List[str]) -> List[str]:
        if any(len(c) != 1 for c in chars):
            raise ValueError("every vocabulary entry must be a single character")
        if len(set(chars)) != len(chars):
            raise ValueError("vocabulary characters must be unique")
        if len(chars) + N_SPECIALS < 8:
            raise ValueError("vocabulary size must be at least 8")
        return chars

    _index: dict = PrivateAttr(default_factory=dict)

    def model_post_init(self, __context) -> None:
        self._index = {c: i + N_SPECIALS for i, c in enumerate(self.chars)}

    @classmethod
    def toy(cls) -> "Vocab":
        return cls(chars=list(TOY_CHARS))

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "Vocab":
        """Vocabulary of every character seen, in first-seen order."""
        seen: dict = {}
        for text in texts:
            for ch in text:
                seen.setdefault(ch, None)
        return cls(chars=list(seen))

    @property
    def vs(self) -> int:
        return len(self.chars) + N_SPECIALS

    @property
    def n_content(self) -> int:
        return len(self.chars)

    @property
    def content_ids(self) -> List[int]:
        return list(range(N_SPECIALS, self.vs))

    def is_content(self, token_id: int) -> bool:
        return N_SPECIALS <= token_id < self.vs

    def encode(self, text: str) -> TokenSeq:
        """
        Encode text character by character.

        Raises:
            UnknownSymbolError: Listing every character not in the vocabulary
        """
        index = self._index
        unknown = [ch for ch in text if ch not in index]
        if unknown:
            raise UnknownSymbolError(unknown)
        return TokenSeq(ids=tuple(index[ch] for ch in text))

    def decode(self, seq: TokenSeq | Sequence[int], keep_specials: bool = False) -> str:
        """
        Decode ids back to text.

        Args:
            seq: TokenSeq or raw ids
            keep_specials: Render MASK and other specials as ``<mask>`` etc.
                instead of rejecting them

        Raises:
            ContractError: For ids outside the vocabulary, or specials when
                ``keep_specials`` is false
        """
        ids = seq.ids if isinstance(seq, TokenSeq) else seq
        out = []
        for token in ids:
            if self.is_content(token):
                out.append(self.chars[token - N_SPECIALS])
            elif keep_specials and token in SPECIAL_SYMBOLS:
                out.append(SPECIAL_SYMBOLS[token])
            else:
                raise ContractError(f"id {token} is not a content token of this vocabulary")
        return "".join(out)

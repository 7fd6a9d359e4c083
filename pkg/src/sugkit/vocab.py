"""Character-level vocabulary with reserved marker tokens."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

PAD = "<PAD>"
UNK = "<UNK>"
EOSUG = "<EOSUG>"
# segment markers, in serialization order, then the answer marker and list separator
P_MARK, C_MARK, H_MARK, B_MARK, U_MARK = "<P>", "<C>", "<H>", "<B>", "<U>"
Q_MARK = "<Q>"
SEP = "<SEP>"

SEGMENT_MARKERS = (P_MARK, C_MARK, H_MARK, B_MARK, U_MARK)
RESERVED_TOKENS = (PAD, UNK, EOSUG) + SEGMENT_MARKERS + (Q_MARK, SEP)


@dataclass(frozen=True)
class Vocabulary:
    """Dense token table. Ids are positions in ``tokens``.

    Every reserved token is multi-character, so character-level encoding of
    user text can never produce one; that is what keeps serialization
    unambiguous.
    """

    tokens: tuple[str, ...]
    reserved: frozenset[int]
    stop_ids: frozenset[int]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")
        if UNK not in index:
            raise ValueError("vocabulary must contain the UNK token")
        if not self.stop_ids <= set(range(len(self.tokens))):
            raise ValueError("stop ids outside the vocabulary")
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_chars(cls, chars: Iterable[str]) -> Vocabulary:
        body = sorted({c for c in chars if len(c) == 1})
        tokens = RESERVED_TOKENS + tuple(body)
        reserved = frozenset(range(len(RESERVED_TOKENS)))
        return cls(tokens, reserved, frozenset({tokens.index(EOSUG)}))

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> Vocabulary:
        chars: set[str] = set()
        for text in texts:
            chars.update(text)
        return cls.from_chars(chars)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def id(self, token: str) -> int:
        return self._index[token]

    @property
    def pad_id(self) -> int:
        return self._index.get(PAD, self._index[UNK])

    @property
    def unk_id(self) -> int:
        return self._index[UNK]

    @property
    def eos_id(self) -> int:
        return min(self.stop_ids)

    def encode(self, text: str) -> tuple[list[int], int]:
        """Encode ``text`` character by character. Returns ids and the UNK count."""
        unk = self.unk_id
        ids = []
        n_unk = 0
        for ch in text:
            i = self._index.get(ch)
            if i is None or i in self.reserved:
                i = unk
                n_unk += 1
            ids.append(i)
        return ids, n_unk

    def decode(self, ids: Sequence[int]) -> str:
        """Inverse of :meth:`encode` for UNK-free text; stop tokens are dropped."""
        return "".join(self.tokens[i] for i in ids if i not in self.stop_ids)

    def to_dict(self) -> dict:
        return {
            "tokens": list(self.tokens),
            "reserved": sorted(self.reserved),
            "stop_ids": sorted(self.stop_ids),
        }

    @classmethod
    def from_dict(cls, data: dict) -> Vocabulary:
        return cls(
            tuple(data["tokens"]),
            frozenset(data["reserved"]),
            frozenset(data["stop_ids"]),
        )

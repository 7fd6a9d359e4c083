"""Model input assembly and its token serialization."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .miner import CandidateIndex, lookup
from .vocab import Q_MARK, SEGMENT_MARKERS, SEP, Vocabulary

DEFAULT_M = 10
DEFAULT_N = 10
DEFAULT_HISTORY_CAP = 10


@dataclass(frozen=True)
class SuggestionContext:
    prefix: str
    city: str = ""
    candidates: tuple[str, ...] = ()
    hot_words: tuple[str, ...] = ()
    behavior_history: tuple[str, ...] = ()  # most recent last
    user_profile: tuple[str, ...] = ()  # "key:value" tags

    def __post_init__(self) -> None:
        if not self.prefix:
            raise ValueError("prefix must be non-empty")
        for name in ("candidates", "hot_words", "behavior_history", "user_profile"):
            value = tuple(getattr(self, name))
            object.__setattr__(self, name, value)
            if any(not s for s in value):
                raise ValueError(f"{name} entries must be non-empty strings")
        if len(set(self.candidates)) != len(self.candidates):
            raise ValueError("candidates must be duplicate-free")

    def segments(self) -> tuple[tuple[str, ...], ...]:
        return (
            (self.prefix,),
            self.candidates,
            self.hot_words,
            self.behavior_history,
            self.user_profile,
        )

    def to_dict(self) -> dict:
        return {
            "prefix": self.prefix,
            "city": self.city,
            "candidates": list(self.candidates),
            "hot_words": list(self.hot_words),
            "history": list(self.behavior_history),
            "profile": list(self.user_profile),
        }

    @classmethod
    def from_dict(cls, d: dict) -> SuggestionContext:
        return cls(
            prefix=d["prefix"],
            city=d.get("city", ""),
            candidates=tuple(d.get("candidates", ())),
            hot_words=tuple(d.get("hot_words", ())),
            behavior_history=tuple(d.get("history", ())),
            user_profile=tuple(d.get("profile", ())),
        )


def assemble(
    prefix: str,
    city: str,
    index: CandidateIndex | None,
    hot_words: Sequence[str] = (),
    history: Sequence[str] = (),
    profile: Sequence[str] = (),
    m: int = DEFAULT_M,
    n: int = DEFAULT_N,
    history_cap: int = DEFAULT_HISTORY_CAP,
) -> SuggestionContext:
    if m < 0 or n < 0:
        raise ValueError("m and n must be >= 0")
    candidates = lookup(index, prefix, city, m) if index is not None else []
    return SuggestionContext(
        prefix=prefix,
        city=city,
        candidates=tuple(candidates),
        hot_words=tuple(hot_words[:n]),
        behavior_history=tuple(history[-history_cap:]) if history_cap else (),
        user_profile=tuple(profile),
    )


@dataclass(frozen=True)
class Serialized:
    tokens: tuple[int, ...]
    unk_count: int = 0
    unk_chars: tuple[str, ...] = field(default=(), repr=False)


def serialize(context: SuggestionContext, vocab: Vocabulary) -> Serialized:
    """``<P> prefix <C> c1 <SEP> c2 ... <H> ... <B> ... <U> ...``.

    Characters missing from ``vocab`` become UNK and are counted.
    """
    sep = vocab.id(SEP)
    tokens: list[int] = []
    unk = 0
    missing: list[str] = []
    for marker, items in zip(SEGMENT_MARKERS, context.segments()):
        tokens.append(vocab.id(marker))
        for j, item in enumerate(items):
            if j:
                tokens.append(sep)
            ids, n_unk = vocab.encode(item)
            if n_unk:
                unk += n_unk
                missing.extend(ch for ch in item if ch not in vocab)
            tokens.extend(ids)
    return Serialized(tuple(tokens), unk, tuple(missing))


def parse(tokens: Sequence[int], vocab: Vocabulary, city: str = "") -> SuggestionContext:
    """Inverse of :func:`serialize` for UNK-free contexts."""
    marker_ids = [vocab.id(m) for m in SEGMENT_MARKERS]
    sep = vocab.id(SEP)
    bodies: list[list[list[int]]] = []
    for tok in tokens:
        if tok in marker_ids:
            if marker_ids.index(tok) != len(bodies):
                raise ValueError("segment markers out of order")
            bodies.append([])
        elif not bodies:
            raise ValueError("token before the first segment marker")
        elif tok == sep:
            if not bodies[-1]:
                raise ValueError("separator at the start of a segment")
            bodies[-1].append([])
        else:
            if not bodies[-1]:
                bodies[-1].append([])
            bodies[-1][-1].append(tok)
    if len(bodies) != len(SEGMENT_MARKERS):
        raise ValueError("missing segments")
    fields = [tuple(vocab.decode(item) for item in body) for body in bodies]
    if len(fields[0]) != 1:
        raise ValueError("prefix segment must hold exactly one string")
    return SuggestionContext(
        prefix=fields[0][0],
        city=city,
        candidates=fields[1],
        hot_words=fields[2],
        behavior_history=fields[3],
        user_profile=fields[4],
    )


def prompt_tokens(context: SuggestionContext, vocab: Vocabulary) -> tuple[int, ...]:
    """Decoder input: the serialized context, the answer marker, then the prefix.

    Generation continues the typed prefix, so a suggestion is the prefix text
    followed by the decoded continuation.
    """
    prefix_ids, _ = vocab.encode(context.prefix)
    return serialize(context, vocab).tokens + (vocab.id(Q_MARK),) + tuple(prefix_ids)


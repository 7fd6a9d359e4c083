"""Offline metrics: HR@K, MRR, DIV, QUA, plus slice reports."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from .context import SuggestionContext, assemble, prompt_tokens
from .decoder import DecodeStats, QabsParams, beam_search, qa_beam_search
from .grpo import is_valid_query
from .miner import CandidateIndex
from .scorer import ScorerModel
from .textnorm import normalize_query
from .vocab import Vocabulary

log = logging.getLogger(__name__)

SLICES = ("mix", "click", "order")


class UndefinedMetric(ValueError):
    """Metric over zero instances."""


@dataclass(frozen=True)
class EvalInstance:
    context: SuggestionContext
    truth: str
    clicked: bool = True
    ordered: bool = False

    def __post_init__(self) -> None:
        if not self.truth:
            raise ValueError("truth must be non-empty")

    @classmethod
    def from_dict(cls, d: dict) -> EvalInstance:
        return cls(
            SuggestionContext.from_dict(d),
            d["truth"],
            bool(d.get("clicked", True)),
            bool(d.get("ordered", False)),
        )

    def to_dict(self) -> dict:
        return {**self.context.to_dict(), "truth": self.truth, "clicked": self.clicked, "ordered": self.ordered}


def _check(n: int) -> None:
    if n == 0:
        raise UndefinedMetric("metric undefined over zero instances")


def _check_lengths(suggestions: Sequence[Sequence[str]], k: int) -> None:
    for q in suggestions:
        if len(q) > k:
            raise ValueError(f"suggestion list of length {len(q)} exceeds k={k}")


def hit_rate_at_k(truths: Sequence[str], suggestions: Sequence[Sequence[str]], k: int) -> float:
    _check(len(truths))
    _check_lengths(suggestions, k)
    return sum(t in q for t, q in zip(truths, suggestions, strict=True)) / len(truths)


def reciprocal_rank(truth: str, ranked: Sequence[str]) -> float:
    for i, q in enumerate(ranked, 1):
        if q == truth:
            return 1.0 / i
    return 0.0


def mrr(truths: Sequence[str], suggestions: Sequence[Sequence[str]]) -> float:
    _check(len(truths))
    return sum(reciprocal_rank(t, q) for t, q in zip(truths, suggestions, strict=True)) / len(truths)


def diversity(suggestions: Sequence[Sequence[str]], k: int) -> float:
    """Unique raw query strings over all lists, divided by N * k."""
    _check(len(suggestions))
    unique = set()
    for q in suggestions:
        unique.update(q)
    return len(unique) / (len(suggestions) * k)


def quality(
    suggestions: Sequence[Sequence[str]], k: int, vocab: Vocabulary | None = None
) -> float:
    """Share of the N * k slots holding a format-valid query that is not a
    normalized duplicate of a higher-ranked entry in the same list."""
    _check(len(suggestions))
    _check_lengths(suggestions, k)
    good = 0
    for q in suggestions:
        seen: set[str] = set()
        for s in q:
            norm = normalize_query(s)
            if is_valid_query(s, vocab) and norm not in seen:
                good += 1
            seen.add(norm)
    return good / (len(suggestions) * k)


def metrics(
    truths: Sequence[str], suggestions: Sequence[Sequence[str]], k: int, vocab: Vocabulary | None = None
) -> dict:
    return {
        "hr_at_k": hit_rate_at_k(truths, suggestions, k),
        "mrr": mrr(truths, suggestions),
        "div": diversity(suggestions, k),
        "qua": quality(suggestions, k, vocab),
        "n_instances": len(truths),
    }


@dataclass
class EvalReport:
    hr_at_k: float
    mrr: float
    div: float
    qua: float
    n_instances: int
    k: int
    # slice name -> metrics dict, or None when the slice is empty
    slices: dict[str, dict | None] = field(default_factory=dict)
    failed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def decode_instance(
    model: ScorerModel, context: SuggestionContext, params: QabsParams, vanilla: bool = False
) -> tuple[list[tuple[str, float]], DecodeStats]:
    """Top-K suggestions for one context.

    The vanilla path runs plain beam search at width ``K_search`` so both
    decoders search equally wide.
    """
    prompt = prompt_tokens(context, model.vocab)
    if vanilla:
        result = beam_search(model, prompt, params.K_search, params.T)
    else:
        result = qa_beam_search(model, prompt, params)
    return result.entries(model.vocab, lead=context.prefix)[: params.K], result.stats


def in_slice(inst: EvalInstance, name: str) -> bool:
    if name == "mix":
        return True
    if name == "click":
        return inst.clicked
    if name == "order":
        return inst.ordered
    raise ValueError(f"unknown slice {name!r}")


def evaluate(
    model: ScorerModel,
    index: CandidateIndex | None,
    instances: Sequence[EvalInstance],
    decode: QabsParams,
    slices: Iterable[str] = SLICES,
    m: int = 10,
    n: int = 10,
    vanilla: bool = False,
    dump: list | None = None,
) -> EvalReport:
    """Decode every instance and score all four metrics overall and per slice.

    With an ``index`` the candidate segment is refreshed by lookup; otherwise
    the instance contexts are used as given. Per-instance records are appended
    to ``dump`` when one is passed.
    """
    k = decode.K
    kept: list[EvalInstance] = []
    lists: list[list[str]] = []
    failed = 0
    for inst in instances:
        ctx = inst.context
        if index is not None:
            ctx = assemble(
                ctx.prefix, ctx.city, index, ctx.hot_words, ctx.behavior_history, ctx.user_profile, m=m, n=n
            )
        try:
            entries, stats = decode_instance(model, ctx, decode, vanilla)
        except Exception as exc:  # noqa: BLE001 - counted, reported, excluded
            failed += 1
            log.warning("decode failed for prefix %r: %s", ctx.prefix, exc)
            continue
        kept.append(inst)
        lists.append([q for q, _ in entries])
        if dump is not None:
            dump.append(
                {
                    **inst.to_dict(),
                    "suggestions": [[q, s] for q, s in entries],
                    "stats": asdict(stats),
                }
            )
    per_slice: dict[str, dict | None] = {}
    for name in slices:
        idx = [i for i, inst in enumerate(kept) if in_slice(inst, name)]
        if not idx:
            per_slice[name] = None
            continue
        per_slice[name] = metrics([kept[i].truth for i in idx], [lists[i] for i in idx], k, model.vocab)
    overall = metrics([inst.truth for inst in kept], lists, k, model.vocab) if kept else None
    if overall is None:
        raise UndefinedMetric("no instance could be decoded")
    return EvalReport(
        hr_at_k=overall["hr_at_k"],
        mrr=overall["mrr"],
        div=overall["div"],
        qua=overall["qua"],
        n_instances=len(kept),
        k=k,
        slices=per_slice,
        failed=failed,
    )

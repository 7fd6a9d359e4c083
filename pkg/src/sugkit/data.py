"""Training and evaluation datasets on disk (JSON lines) and SFT pairs."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable, Sequence

from .context import SuggestionContext, prompt_tokens
from .evaluator import EvalInstance
from .grpo import TrainItem
from .miner import read_jsonl, write_jsonl
from .vocab import Vocabulary

log = logging.getLogger(__name__)


def train_item_from_dict(d: dict) -> TrainItem:
    truth = d.get("truth")
    return SuggestionContext.from_dict(d), truth or None, bool(d.get("converted", d.get("ordered", False)))


def train_item_to_dict(item: TrainItem) -> dict:
    context, truth, converted = item
    return {**context.to_dict(), "truth": truth, "converted": converted}


def read_train_set(path: str | Path) -> list[TrainItem]:
    return [train_item_from_dict(d) for d in read_jsonl(path)]


def write_train_set(path: str | Path, items: Iterable[TrainItem]) -> None:
    write_jsonl(path, (train_item_to_dict(i) for i in items))


def read_eval_set(path: str | Path) -> list[EvalInstance]:
    return [EvalInstance.from_dict(d) for d in read_jsonl(path)]


def write_eval_set(path: str | Path, instances: Iterable[EvalInstance]) -> None:
    write_jsonl(path, (i.to_dict() for i in instances))


def vocab_for(items: Sequence[TrainItem]) -> Vocabulary:
    """Character vocabulary covering every context field and truth."""
    texts: list[str] = []
    for context, truth, _ in items:
        for seg in context.segments():
            texts.extend(seg)
        if truth:
            texts.append(truth)
    return Vocabulary.from_texts(texts)


def sft_pairs(items: Sequence[TrainItem], vocab: Vocabulary) -> list[tuple[tuple[int, ...], list[int]]]:
    """``(prompt, continuation + stop)`` per item whose truth extends its prefix."""
    pairs = []
    skipped = 0
    for context, truth, _ in items:
        if not truth or not truth.startswith(context.prefix) or truth == context.prefix:
            skipped += 1
            continue
        ids, _ = vocab.encode(truth[len(context.prefix):])
        pairs.append((prompt_tokens(context, vocab), ids + [vocab.eos_id]))
    if skipped:
        log.warning("%d items skipped: truth does not extend the prefix", skipped)
    return pairs

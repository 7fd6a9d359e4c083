"""Synthetic suggestion tasks and click logs for tests, demos and benchmarks.

Queries come from an order-2 tabular generator over a small alphabet; the
prefix is the first ``prefix_len`` characters of the query.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .context import SuggestionContext
from .miner import ClickLogRecord
from .scorer import ScorerModel, generation_mask
from .vocab import Vocabulary

LETTERS = "abcdefghijklmnopqrstuvwxyz"
CITIES = ("BJ", "SH", "MO", "GZ")


def make_generator(
    vocab: Vocabulary, rng: np.random.Generator, scale: float = 2.5, stop_bias: float = -1.0
) -> ScorerModel:
    """Random order-2 model that only emits plain characters and the stop token."""
    letters = [i for i in range(len(vocab)) if i not in vocab.reserved]
    table = {}
    ctx_ids = [vocab.pad_id] + letters
    for a in ctx_ids:
        for b in ctx_ids:
            row = rng.normal(scale=scale, size=len(vocab))
            row[list(vocab.stop_ids)] += stop_bias
            table[a, b] = row
    return ScorerModel(vocab, 2, table, generation_mask(vocab))


def sample_query(
    generator: ScorerModel, rng: np.random.Generator, min_len: int = 3, max_len: int = 9
) -> str:
    vocab = generator.vocab
    while True:
        tokens: list[int] = []
        while len(tokens) <= max_len:
            p = np.exp(generator.score_next(tokens))
            v = int(rng.choice(len(p), p=p / p.sum()))
            if v in vocab.stop_ids:
                break
            tokens.append(v)
        if min_len <= len(tokens) <= max_len:
            return vocab.decode(tokens)


@dataclass
class SyntheticTask:
    vocab: Vocabulary
    generator: ScorerModel
    train: list[tuple[SuggestionContext, str, bool]]
    test: list[tuple[SuggestionContext, str, bool]]


def make_task(
    seed: int,
    n_train: int = 2000,
    n_test: int = 500,
    n_letters: int = 16,
    prefix_len: int = 2,
    convert_rate: float = 0.2,
    scale: float = 2.5,
    max_len: int = 9,
) -> SyntheticTask:
    rng = np.random.default_rng(seed)
    vocab = Vocabulary.from_chars(LETTERS[:n_letters])
    generator = make_generator(vocab, rng, scale=scale)

    def item():
        q = sample_query(generator, rng, min_len=prefix_len + 1, max_len=max_len)
        city = CITIES[int(rng.integers(len(CITIES)))]
        return SuggestionContext(prefix=q[:prefix_len], city=city), q, bool(rng.random() < convert_rate)

    return SyntheticTask(
        vocab,
        generator,
        [item() for _ in range(n_train)],
        [item() for _ in range(n_test)],
    )


def make_click_logs(
    seed: int,
    days: range = range(1, 9),
    per_day: int = 200,
    n_letters: int = 12,
    click_rate: float = 0.7,
    order_rate: float = 0.2,
) -> list[ClickLogRecord]:
    """Impression/click/order events; each city prefers its own slice of queries."""
    rng = np.random.default_rng(seed)
    vocab = Vocabulary.from_chars(LETTERS[:n_letters])
    generator = make_generator(vocab, rng)
    pools = {c: [sample_query(generator, rng) for _ in range(30)] for c in CITIES}
    records = []
    for day in days:
        for _ in range(per_day):
            city = CITIES[int(rng.integers(len(CITIES)))]
            pool = pools[city]
            # Zipf-like popularity inside the city pool
            q = pool[min(int(rng.zipf(1.6)) - 1, len(pool) - 1)]
            plen = int(rng.integers(1, min(3, len(q)) + 1))
            clicked = bool(rng.random() < click_rate)
            ordered = clicked and bool(rng.random() < order_rate)
            records.append(ClickLogRecord(day, city, q[:plen], q, clicked, ordered))
    return records

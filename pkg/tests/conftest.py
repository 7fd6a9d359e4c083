from __future__ import annotations

import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from sugkit.scorer import ScorerModel, generation_mask  # noqa: E402
from sugkit.vocab import Vocabulary  # noqa: E402

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion number -> (passed, detail), filled in by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def letters_vocab(n_letters: int = 17) -> Vocabulary:
    """PAD, UNK and one stop token followed by plain letters."""
    letters = tuple("abcdefghijklmnopqrstuvwxyz"[:n_letters])
    return Vocabulary(("<PAD>", "<UNK>", "<EOSUG>") + letters, frozenset({0, 1, 2}), frozenset({2}))


def random_model(rng: np.random.Generator, order: int = 1, n_letters: int = 17, scale: float = 1.0) -> ScorerModel:
    vocab = letters_vocab(n_letters)
    active = np.ones(len(vocab), dtype=bool)
    active[[0, 1]] = False  # never emit PAD/UNK
    dense = ScorerModel.random(vocab, order, rng, scale)
    return ScorerModel(vocab, order, dense.table, active)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def marker_model(rng: np.random.Generator, chars: str = "abcdef", order: int = 1, scale: float = 2.0) -> ScorerModel:
    """Random model over a full marker vocabulary that only emits plain characters and the stop token."""
    vocab = Vocabulary.from_chars(chars)
    return ScorerModel(vocab, order, ScorerModel.random(vocab, order, rng, scale).table, generation_mask(vocab))

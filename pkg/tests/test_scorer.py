import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import letters_vocab, random_model
from oracles import central_difference, relative_error
from sugkit.decoder import beam_search
from sugkit.scorer import (
    ScorerModel,
    TrainingDivergence,
    logprob_gradient,
    prune_head,
    score_next,
    sequence_logprob,
    sft_train,
)
from sugkit.vocab import Vocabulary

TINY = Vocabulary(("<UNK>", "a", "b", "<EOSUG>"), frozenset({0, 3}), frozenset({3}))


def _logsumexp(lp):
    finite = lp[np.isfinite(lp)]
    m = finite.max()
    return m + math.log(np.exp(finite - m).sum())


def test_uniform_model():
    lp = score_next(ScorerModel(TINY, order=2), [1, 2])
    assert np.allclose(lp, math.log(1 / 4), rtol=0, atol=0)


def test_short_context_is_left_padded():
    m = random_model(np.random.default_rng(0), order=3)
    pad = m.vocab.pad_id
    assert np.array_equal(m.score_next([5]), m.log_probs((pad, pad, 5)))


def test_pruned_token_scores_minus_inf():
    model = prune_head(ScorerModel(TINY, 1), {1: 5}, top_n=2)
    assert not model.active[2]
    assert score_next(model, [1])[2] == -np.inf
    assert sequence_logprob(model, [1], [2, 3]) == -np.inf


def test_out_of_range_token():
    with pytest.raises(IndexError):
        score_next(ScorerModel(TINY, 1), [7])


@given(st.integers(0, 2**32 - 1), st.integers(0, 3), st.lists(st.integers(0, 19), max_size=5))
def test_softmax_normalization(seed, order, ctx):
    m = random_model(np.random.default_rng(seed), order=min(order, 2), scale=3.0)
    assert abs(_logsumexp(m.score_next(ctx))) <= 1e-9


def test_sequence_logprob_uniform():
    assert sequence_logprob(ScorerModel(TINY, 1), [1], [1, 2]) == pytest.approx(2 * math.log(1 / 4), abs=1e-15)


def test_sequence_logprob_is_sum_of_step_reads(rng):
    m = random_model(rng, order=2)
    ctx, cont = [3, 4], [5, 6, 2]
    manual = 0.0
    for i, t in enumerate(cont):
        manual += float(m.score_next(ctx + cont[:i])[t])
    assert sequence_logprob(m, ctx, cont) == manual


def test_sequence_logprob_rejects_empty():
    with pytest.raises(ValueError):
        sequence_logprob(ScorerModel(TINY, 1), [1], [])


def test_prune_identity():
    m = random_model(np.random.default_rng(3), order=1)
    V = len(m.vocab)
    pruned = prune_head(m, {i: 1 for i in range(V)}, V)
    assert np.array_equal(pruned.active, m.active)
    for ctx in range(V):
        assert np.array_equal(pruned.score_next([ctx]), m.score_next([ctx]))


def test_prune_selection_rule():
    tokens = ("<UNK>", "<EOSUG>") + tuple(f"t{i}" for i in range(48))
    vocab = Vocabulary(tokens, frozenset({0, 1}), frozenset({1}))
    freqs = {i: 50 - i for i in range(50)}  # frequencies 50..1 by id
    pruned = prune_head(ScorerModel(vocab, 1), freqs, 10)
    assert set(np.flatnonzero(pruned.active)) == {0, 1} | set(range(10))


def test_prune_ties_go_to_lower_id():
    tokens = ("<UNK>", "<EOSUG>") + tuple("abcdef")
    vocab = Vocabulary(tokens, frozenset({0, 1}), frozenset({1}))
    pruned = prune_head(ScorerModel(vocab, 1), {2: 3, 3: 3, 4: 3, 5: 3}, 3)
    assert set(np.flatnonzero(pruned.active)) == {0, 1, 2, 3, 4}


def test_prune_clamps_and_rejects():
    m = ScorerModel(TINY, 1)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        pruned = prune_head(m, {}, 99)
    assert caught and np.array_equal(pruned.active, m.active)
    with pytest.raises(ValueError):
        prune_head(m, {}, 1)


def test_prune_leaves_original_unchanged():
    m = random_model(np.random.default_rng(5), order=1)
    before = m.score_next([4]).copy()
    prune_head(m, {3: 9}, 5)
    assert m.active.sum() == 18
    assert np.array_equal(m.score_next([4]), before)


@given(st.integers(0, 2**32 - 1), st.integers(3, 20), st.integers(0, 19))
def test_prune_monotonicity(seed, top_n, ctx):
    rng = np.random.default_rng(seed)
    m = random_model(rng, order=1, scale=2.0)
    freqs = {i: int(c) for i, c in enumerate(rng.integers(0, 50, size=20))}
    pruned = prune_head(m, freqs, top_n)
    full = m.score_next([ctx])
    small = pruned.score_next([ctx])
    for t in np.flatnonzero(pruned.active):
        assert small[t] >= full[t]


def test_logprob_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    for _ in range(10):
        m = random_model(rng, order=1, n_letters=5)
        ctx = [int(x) for x in rng.integers(2, 8, size=2)]
        cont = [int(x) for x in rng.integers(2, 8, size=3)]
        num = central_difference(lambda mm: sequence_logprob(mm, ctx, cont), m)
        assert relative_error(logprob_gradient(m, ctx, cont), num) < 1e-4


def test_gradient_only_touches_visited_rows(rng):
    m = random_model(rng, order=1)
    g = logprob_gradient(m, [4], [5, 6])
    assert set(g) == {(4,), (5,)}


def test_gradient_additive_over_memoryless_model():
    m = ScorerModel.random(letters_vocab(5), 0, np.random.default_rng(2))
    cont = [3, 4, 2]
    once = logprob_gradient(m, [], cont)
    twice = logprob_gradient(m, [], cont + cont)
    assert np.allclose(twice[()], 2 * once[()], atol=1e-12)


def test_gradient_rejects_inactive_token():
    model = prune_head(ScorerModel(TINY, 1), {1: 5}, top_n=2)
    with pytest.raises(ValueError):
        logprob_gradient(model, [1], [2])


def test_sft_single_pair_becomes_greedy_output():
    vocab = letters_vocab(5)
    m = ScorerModel(vocab, 2)
    ctx, target = (3, 4), [5, 6, 3, vocab.eos_id]
    trained, losses = sft_train(m, [(ctx, target)], epochs=60, lr=1.0)
    greedy = beam_search(trained, ctx, 1, 6).hypotheses[0]
    assert list(greedy.tokens) == target and greedy.finished
    assert losses[-1] < losses[0]


def test_sft_zero_lr_is_identity(rng):
    m = random_model(rng, order=1)
    trained, _ = sft_train(m, [((3,), [4, 2])], epochs=3, lr=0.0)
    assert trained.same_parameters(m)


def test_sft_divergence_raises():
    m = ScorerModel(TINY, 1, {(1,): np.array([0.0, np.nan, 0.0, 0.0])})
    with pytest.raises(TrainingDivergence):
        sft_train(m, [((1,), [1, 3])], epochs=1, lr=0.1)


def test_sft_rejects_empty_dataset():
    with pytest.raises(ValueError):
        sft_train(ScorerModel(TINY, 1), [], 1, 0.1)


def test_checkpoint_round_trip(tmp_path, rng):
    m = prune_head(random_model(rng, order=2, n_letters=4), {3: 2}, 4)
    path = tmp_path / "ckpt.json"
    m.save(path)
    again = ScorerModel.load(path)
    assert again.same_parameters(m)
    assert again.vocab == m.vocab and again.order == m.order
    assert path.read_text() == json.dumps(again.to_dict())

"""Tabular autoregressive scorer.

An order-``c`` model keeps one row of logits per length-``c`` token context.
Rows that were never written are all-zero, i.e. uniform over the active head.
Everything downstream (decoders, GRPO) only talks to :meth:`ScorerModel.score_next`,
so any other scorer with the same method plugs in.
"""

from __future__ import annotations

import copy
import json
import logging
import math
import warnings
from collections import Counter
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .vocab import Vocabulary

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1

Context = tuple[int, ...]
Gradient = dict[Context, np.ndarray]


class TrainingDivergence(RuntimeError):
    """Raised when a training loss becomes non-finite."""


def generation_mask(vocab: Vocabulary) -> np.ndarray:
    """Active head for generation: plain tokens and stop tokens.

    PAD, UNK, segment markers and separators only ever appear in the input,
    so a suggestion model has no business emitting them.
    """
    return np.array([i not in vocab.reserved or i in vocab.stop_ids for i in range(len(vocab))])


def log_softmax(logits: np.ndarray, active: np.ndarray) -> np.ndarray:
    out = np.full(logits.shape, -np.inf)
    z = logits[active]
    zmax = z.max()
    shifted = z - zmax
    out[active] = shifted - math.log(np.exp(shifted).sum())
    return out


class ScorerModel:
    """Order-``c`` tabular softmax model over a :class:`Vocabulary`."""

    def __init__(
        self,
        vocab: Vocabulary,
        order: int = 3,
        table: Mapping[Context, np.ndarray] | None = None,
        active: np.ndarray | None = None,
    ):
        if order < 0:
            raise ValueError("order must be >= 0")
        self.vocab = vocab
        self.order = order
        self.table: dict[Context, np.ndarray] = {
            tuple(k): np.asarray(v, dtype=np.float64) for k, v in (table or {}).items()
        }
        if active is None:
            active = np.ones(len(vocab), dtype=bool)
        self.active = np.asarray(active, dtype=bool).copy()
        self.active.setflags(write=False)
        self._zeros = np.zeros(len(vocab))
        self._cache: dict[Context, np.ndarray] = {}

    @classmethod
    def random(cls, vocab: Vocabulary, order: int, rng: np.random.Generator, scale: float = 1.0) -> ScorerModel:
        """Dense random model: a row for every possible context."""
        V = len(vocab)
        table = {}
        for flat in range(V**order):
            key = tuple(int(x) for x in np.unravel_index(flat, (V,) * order)) if order else ()
            table[key] = rng.normal(scale=scale, size=V)
        return cls(vocab, order, table)

    @property
    def active_ids(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.active)]

    def context_key(self, tokens: Sequence[int]) -> Context:
        if self.order == 0:
            return ()
        tail = tuple(tokens[-self.order:])
        if len(tail) < self.order:
            tail = (self.vocab.pad_id,) * (self.order - len(tail)) + tail
        return tail

    def _check(self, tokens: Sequence[int]) -> None:
        V = len(self.vocab)
        for t in tokens:
            if not 0 <= t < V:
                raise IndexError(f"token id {t} outside vocabulary of size {V}")

    def row(self, key: Context) -> np.ndarray:
        return self.table.get(key, self._zeros)

    def log_probs(self, key: Context) -> np.ndarray:
        lp = self._cache.get(key)
        if lp is None:
            lp = log_softmax(self.row(key), self.active)
            lp.setflags(write=False)
            self._cache[key] = lp
        return lp

    def score_next(self, tokens: Sequence[int]) -> np.ndarray:
        """Log-probabilities of the next token; ``-inf`` outside the active head."""
        self._check(tokens[-self.order:] if self.order else ())
        return self.log_probs(self.context_key(tokens))

    def apply_gradient(self, grad: Gradient, lr: float) -> None:
        """In-place descent step ``theta -= lr * grad``."""
        if lr == 0:
            return
        for key, g in grad.items():
            self.table[key] = self.row(key) - lr * g
        self._cache.clear()

    def copy(self) -> ScorerModel:
        return ScorerModel(self.vocab, self.order, copy.deepcopy(self.table), self.active)

    def same_parameters(self, other: ScorerModel) -> bool:
        if self.order != other.order or not np.array_equal(self.active, other.active):
            return False
        for key in set(self.table) | set(other.table):
            if not np.array_equal(self.row(key), other.row(key)):
                return False
        return True

    # checkpoints ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "vocab": self.vocab.to_dict(),
            "order": self.order,
            "active_head": self.active_ids,
            "logits": [[list(k), self.table[k].tolist()] for k in sorted(self.table)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> ScorerModel:
        if data.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {data.get('version')!r}")
        vocab = Vocabulary.from_dict(data["vocab"])
        active = np.zeros(len(vocab), dtype=bool)
        active[data["active_head"]] = True
        table = {tuple(k): np.array(v, dtype=np.float64) for k, v in data["logits"]}
        return cls(vocab, data["order"], table, active)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> ScorerModel:
        return cls.from_dict(json.loads(Path(path).read_text()))


def score_next(model: ScorerModel, tokens: Sequence[int]) -> np.ndarray:
    return model.score_next(tokens)


def sequence_logprob(model: ScorerModel, context_tokens: Sequence[int], continuation: Sequence[int]) -> float:
    """Cumulative log-probability of ``continuation`` after ``context_tokens``."""
    if len(continuation) == 0:
        raise ValueError("continuation must be non-empty")
    seq = list(context_tokens)
    total = 0.0
    for tok in continuation:
        total += float(model.score_next(seq)[tok])
        seq.append(tok)
    return total


def logprob_gradient(model: ScorerModel, context_tokens: Sequence[int], continuation: Sequence[int]) -> Gradient:
    """Gradient of ``log p(continuation | context)`` w.r.t. the touched logit rows.

    For one step with row ``z`` and target ``v`` the derivative is
    ``onehot(v) - softmax(z)`` on the active head and 0 elsewhere.
    """
    seq = list(context_tokens)
    grad: Gradient = {}
    model._check(continuation)
    for tok in continuation:
        key = model.context_key(seq)
        lp = model.log_probs(key)
        if lp[tok] == -np.inf:
            raise ValueError(f"token {tok} is outside the active head")
        g = grad.get(key)
        if g is None:
            g = grad[key] = np.zeros(len(model.vocab))
        g -= np.exp(lp)
        g[tok] += 1.0
        seq.append(tok)
    return grad


def add_scaled(acc: Gradient, grad: Gradient, scale: float) -> None:
    for key, g in grad.items():
        if key in acc:
            acc[key] += scale * g
        else:
            acc[key] = scale * g


def token_frequencies(sequences: Iterable[Sequence[int]]) -> Counter:
    counts: Counter = Counter()
    for seq in sequences:
        counts.update(seq)
    return counts


def prune_head(model: ScorerModel, token_frequencies: Mapping[int, int], top_n: int) -> ScorerModel:
    """Restrict the scorable head to reserved tokens plus the ``top_n`` most frequent.

    Ties on frequency go to the lower token id. Tokens already pruned stay pruned.
    Returns a new model; ``model`` is not touched.
    """
    V = len(model.vocab)
    n_reserved = len(model.vocab.reserved | model.vocab.stop_ids)
    if top_n > V:
        warnings.warn(f"top_n={top_n} exceeds vocabulary size {V}; clamping", stacklevel=2)
        top_n = V
    if top_n < n_reserved:
        raise ValueError(f"top_n={top_n} is smaller than the {n_reserved} reserved tokens")
    ranked = sorted(range(V), key=lambda t: (-token_frequencies.get(t, 0), t))
    keep = np.zeros(V, dtype=bool)
    keep[ranked[:top_n]] = True
    keep[list(model.vocab.reserved | model.vocab.stop_ids)] = True
    pruned = model.copy()
    pruned.active = keep & model.active
    pruned.active.setflags(write=False)
    pruned._cache.clear()
    return pruned


def sft_train(
    model: ScorerModel,
    dataset: Sequence[tuple[Sequence[int], Sequence[int]]],
    epochs: int,
    lr: float,
    batch_size: int = 16,
    seed: int = 0,
) -> tuple[ScorerModel, list[float]]:
    """Minibatch SGD on mean token-level cross-entropy.

    Returns the trained copy and the mean training loss of every epoch.
    """
    if lr < 0:
        raise ValueError("lr must be >= 0")
    if not dataset:
        raise ValueError("empty SFT dataset")
    model = model.copy()
    rng = np.random.default_rng(seed)
    losses = []
    for epoch in range(epochs):
        order = rng.permutation(len(dataset))
        epoch_loss = 0.0
        epoch_tokens = 0
        for start in range(0, len(order), batch_size):
            batch = [dataset[i] for i in order[start:start + batch_size]]
            n_tok = sum(len(target) for _, target in batch)
            grad: Gradient = {}
            batch_loss = 0.0
            for context, target in batch:
                batch_loss -= sequence_logprob(model, context, target)
                add_scaled(grad, logprob_gradient(model, context, target), -1.0 / n_tok)
            if not math.isfinite(batch_loss):
                raise TrainingDivergence(
                    f"non-finite SFT loss at epoch {epoch}, batch starting {start}: {batch_loss}"
                )
            model.apply_gradient(grad, lr)
            epoch_loss += batch_loss
            epoch_tokens += n_tok
        losses.append(epoch_loss / epoch_tokens)
        log.debug("sft epoch %d loss %.5f", epoch, losses[-1])
    return model, losses

"""Beam search decoders.

``beam_search`` is the plain width-K search over the full active vocabulary and
serves as the reference. ``qa_beam_search`` adds the absolute score floor, the
top-score acceptance window and the two early exits.

Ranking everywhere: higher score first, then shorter sequence, then
lexicographic token ids.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .scorer import ScorerModel
from .vocab import Vocabulary

EXIT_REASONS = ("saturation", "fail_safe", "budget", "beams_exhausted")


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[int, ...]
    score: float
    finished: bool = False


def rank_key(h: Hypothesis):
    return (-h.score, len(h.tokens), h.tokens)


@dataclass(frozen=True)
class QabsParams:
    K: int = 12
    T: int = 15
    tau: float = -15.0
    alpha: float = 1.8
    R_min: float = 4
    K_search: int = 12
    K_win: int = 15

    def __post_init__(self) -> None:
        if self.K < 1 or self.T < 1 or self.K_search < 1 or self.K_win < 1:
            raise ValueError("K, T, K_search and K_win must be >= 1")
        if not self.alpha * self.K >= 1:
            raise ValueError("alpha * K must be >= 1")
        if self.R_min < 0:
            raise ValueError("R_min must be >= 0")

    @classmethod
    def ungated(cls, K: int, T: int) -> QabsParams:
        """Every gate off; decodes exactly like :func:`beam_search` with width K."""
        return cls(K=K, T=T, tau=-math.inf, alpha=math.inf, R_min=math.inf, K_search=K, K_win=2**62)


@dataclass
class DecodeStats:
    steps: int = 0
    model_calls: int = 0
    exit_reason: str = "budget"
    result_count: int = 0
    unfinished_in_result: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class SuggestionList:
    """Ranked hypotheses plus the decode trace."""

    hypotheses: list[Hypothesis]
    stats: DecodeStats

    def entries(self, vocab: Vocabulary, lead: str = "") -> list[tuple[str, float]]:
        """Detokenized ``(query, score)`` pairs.

        Unfinished hypotheses only show up when nothing finished.
        """
        finished = [h for h in self.hypotheses if h.finished]
        use = finished or self.hypotheses
        return [(lead + vocab.decode(h.tokens), h.score) for h in use]

    def queries(self, vocab: Vocabulary, lead: str = "") -> list[str]:
        return [q for q, _ in self.entries(vocab, lead)]


def _lex_ranks(beams: Sequence[Hypothesis]) -> np.ndarray:
    order = sorted(range(len(beams)), key=lambda i: beams[i].tokens)
    ranks = np.empty(len(beams), dtype=np.int64)
    ranks[order] = np.arange(len(beams))
    return ranks


def _select(beams: Sequence[Hypothesis], beam_idx: np.ndarray, tok: np.ndarray, scores: np.ndarray, k: int):
    """Top-k expansions by (-score, parent lexicographic rank, token)."""
    lex = _lex_ranks(beams)[beam_idx]
    order = np.lexsort((tok, lex, -scores))[:k]
    return [Hypothesis(beams[b].tokens + (int(v),), float(s)) for b, v, s in zip(beam_idx[order], tok[order], scores[order])]


def _stop_mask(model: ScorerModel) -> np.ndarray:
    mask = np.zeros(len(model.vocab), dtype=bool)
    mask[list(model.vocab.stop_ids)] = True
    return mask


def _finish(C: list[Hypothesis], B: list[Hypothesis], K: int, stats: DecodeStats) -> SuggestionList:
    top = sorted(C + B, key=rank_key)[:K]
    stats.result_count = len(top)
    stats.unfinished_in_result = sum(not h.finished for h in top)
    return SuggestionList(top, stats)


def beam_search(model: ScorerModel, context: Sequence[int], K: int, T: int) -> SuggestionList:
    """Width-K beam search with full-vocabulary expansion at every step."""
    if K < 1 or T < 1:
        raise ValueError("K and T must be >= 1")
    context = tuple(context)
    stop = _stop_mask(model)
    B = [Hypothesis((), 0.0)]
    C: list[Hypothesis] = []
    stats = DecodeStats()
    for _ in range(T):
        if not B:
            stats.exit_reason = "beams_exhausted"
            break
        stats.steps += 1
        lp = np.stack([model.score_next(context + h.tokens) for h in B])
        stats.model_calls += len(B)
        scores = np.array([h.score for h in B])[:, None] + lp
        for b, h in enumerate(B):
            for s in np.flatnonzero(stop & np.isfinite(scores[b])):
                C.append(Hypothesis(h.tokens + (int(s),), float(scores[b, s]), True))
        open_ = np.isfinite(scores) & ~stop[None, :]
        beam_idx, tok = np.nonzero(open_)
        B = _select(B, beam_idx, tok, scores[beam_idx, tok], K)
    else:
        stats.exit_reason = "budget"
    return _finish(C, B, K, stats)


def qa_beam_search(model: ScorerModel, context: Sequence[int], params: QabsParams) -> SuggestionList:
    """Quality-aware accelerated beam search.

    Each beam expands its ``K_search`` best non-stop tokens plus every stop
    token. A finished expansion is kept when its score beats the smallest of
    the step's ``K_win`` best expansion scores and clears ``tau``.
    """
    p = params
    context = tuple(context)
    stop = _stop_mask(model)
    B = [Hypothesis((), 0.0)]
    C: list[Hypothesis] = []
    stats = DecodeStats()
    for _ in range(p.T):
        if not B:
            stats.exit_reason = "beams_exhausted"
            break
        stats.steps += 1
        c_temp: list[Hypothesis] = []
        window: list[float] = []
        cand_beam: list[int] = []
        cand_tok: list[int] = []
        cand_score: list[float] = []
        for b, h in enumerate(B):
            lp = model.score_next(context + h.tokens)
            stats.model_calls += 1
            s_all = h.score + lp
            finite = np.isfinite(lp)
            open_ids = np.flatnonzero(finite & ~stop)
            # stable sort keeps lower ids first among equal log-probs
            top = open_ids[np.argsort(-lp[open_ids], kind="stable")[: p.K_search]]
            for v in top:
                window.append(float(s_all[v]))
                cand_beam.append(b)
                cand_tok.append(int(v))
                cand_score.append(float(s_all[v]))
            for v in np.flatnonzero(finite & stop):
                s_new = float(s_all[v])
                window.append(s_new)
                if s_new > p.tau:
                    c_temp.append(Hypothesis(h.tokens + (int(v),), s_new, True))
        if len(window) >= p.K_win:
            win_min = float(np.partition(np.array(window), len(window) - p.K_win)[len(window) - p.K_win])
        else:
            win_min = -math.inf
        for h in c_temp:
            if h.score > win_min and h.score >= p.tau:
                C.append(h)
        # an early exit returns C alone: the beams in hand are the parents of
        # this step's expansions (at step 1, the bare input) and are not results
        if len(C) >= p.alpha * p.K:
            stats.exit_reason = "saturation"
            B = []
            break
        s_max = max(cand_score) if cand_score else -math.inf
        if s_max < p.tau and len(C) >= p.R_min:
            stats.exit_reason = "fail_safe"
            B = []
            break
        keep = [i for i, s in enumerate(cand_score) if s >= p.tau]
        B = _select(
            B,
            np.array([cand_beam[i] for i in keep], dtype=np.int64),
            np.array([cand_tok[i] for i in keep], dtype=np.int64),
            np.array([cand_score[i] for i in keep]),
            p.K_search,
        )
    else:
        stats.exit_reason = "budget"
    return _finish(C, B, p.K, stats)


def decode_group(model: ScorerModel, context: Sequence[int], G: int, T: int) -> list[Hypothesis]:
    """The top-G distinct hypotheses of a width-G beam search."""
    if G < 1:
        raise ValueError("G must be >= 1")
    return beam_search(model, context, G, T).hypotheses


def sample_group(
    model: ScorerModel, context: Sequence[int], G: int, T: int, rng: np.random.Generator
) -> list[Hypothesis]:
    """G independent ancestral samples. Duplicates are possible."""
    context = tuple(context)
    stop_ids = model.vocab.stop_ids
    out = []
    for _ in range(G):
        tokens: tuple[int, ...] = ()
        score = 0.0
        finished = False
        for _ in range(T):
            lp = model.score_next(context + tokens)
            p = np.exp(lp)
            v = int(rng.choice(len(p), p=p / p.sum()))
            tokens += (v,)
            score += float(lp[v])
            if v in stop_ids:
                finished = True
                break
        out.append(Hypothesis(tokens, score, finished))
    return out

"""Beam-search-driven GRPO.

Per training input: decode a group of G > K sequences from the policy, score
them with the five-term reward, standardize rewards inside the group, and
take a descent step on the order-weighted clipped-ratio loss.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .context import SuggestionContext, prompt_tokens
from .decoder import Hypothesis, decode_group, sample_group
from .scorer import Gradient, ScorerModel, TrainingDivergence, add_scaled, logprob_gradient, sequence_logprob
from .textnorm import normalize_query
from .vocab import Vocabulary

log = logging.getLogger(__name__)

MAX_REPEAT = 3  # a token repeated 4+ times in a row is a format error
# advantages are snapped to multiples of this so they sum to exactly 0
ADVANTAGE_GRID = 2.0**-40


class UnsupportedConfig(ValueError):
    pass


@dataclass(frozen=True)
class GrpoConfig:
    K: int = 12
    G: int = 16
    T: int = 15
    eps: float = 0.1
    delta: float = 1e-4
    lambda_gap: float = 1.0
    lambda_hit: float = 1.0
    lambda_rank: float = 2.0
    lambda_fmt: float = 4.0
    lambda_miss: float = 1.0
    lambda_order: float = 1.5
    beta: float = 0.0
    lr: float = 2e-6
    sampler: str = "beam"
    # PPO-style min(unclipped, clipped) surrogate instead of the plain clipped ratio
    ppo_min: bool = False
    # copy the policy into the reference every N steps; 0 keeps it frozen
    ref_sync_every: int = 0

    def __post_init__(self) -> None:
        if not self.G > self.K >= 1:
            raise ValueError(f"need G > K >= 1, got K={self.K}, G={self.G}")
        if not 0 < self.eps < 1:
            raise ValueError("eps must be in (0, 1)")
        if not self.delta > 0:
            raise ValueError("delta must be > 0")
        for name in ("lambda_gap", "lambda_hit", "lambda_rank", "lambda_fmt", "lambda_miss", "lambda_order"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.beta != 0:
            raise UnsupportedConfig("only beta = 0 is supported (no KL term)")
        if self.sampler not in ("beam", "random"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.lr < 0 or self.ref_sync_every < 0:
            raise ValueError("lr and ref_sync_every must be >= 0")


def validity_check(query_tokens: Sequence[int], vocab: Vocabulary, max_tokens: int | None = None) -> bool:
    """Format check on a query (no stop token).

    Fails on reserved/UNK tokens, an empty normalized string, more than
    ``max_tokens`` tokens, or one token repeated more than ``MAX_REPEAT`` times
    in a row.
    """
    if max_tokens is not None and len(query_tokens) > max_tokens:
        return False
    run = 0
    prev = None
    for t in query_tokens:
        if t in vocab.reserved or t in vocab.stop_ids or t == vocab.unk_id:
            return False
        run = run + 1 if t == prev else 1
        if run > MAX_REPEAT:
            return False
        prev = t
    return normalize_query(vocab.decode(query_tokens)) != ""


def is_valid_query(text: str, vocab: Vocabulary | None = None, max_tokens: int | None = None) -> bool:
    """String-level :func:`validity_check`. Without a vocab every character is a token."""
    if vocab is None:
        vocab = Vocabulary.from_chars(text)
    ids, _ = vocab.encode(text)
    return validity_check(ids, vocab, max_tokens)


@dataclass
class RewardBreakdown:
    """Per-sequence contribution of each reward stage; they sum to the reward."""

    ranks: np.ndarray
    gap: np.ndarray
    fmt: np.ndarray
    hit: np.ndarray
    rank: np.ndarray
    miss: np.ndarray
    floor: np.ndarray
    # reward right before the validity floor / tail boost
    pre_floor: np.ndarray
    v_gap: float
    v_tail: float
    cnt_bad: int
    rank_star: int | None

    def total(self) -> np.ndarray:
        return self.gap + self.fmt + self.hit + self.rank + self.miss + self.floor


def _log10_table(n: int) -> np.ndarray:
    # index r -> log10(r + 1), via math.log10 so results match scalar code bit for bit
    return np.array([math.log10(r + 1) if r else math.nan for r in range(n + 1)])


def reward_vector(
    scores: Sequence[float], valid: Sequence[bool], is_truth: Sequence[bool], config: GrpoConfig
) -> tuple[np.ndarray, RewardBreakdown]:
    """Rewards for one decoded group.

    ``is_truth[i]`` marks sequences equal to the ground truth. Stage order and
    arithmetic follow the reference pipeline exactly: gap shaping, format
    penalty, then either hit/rank bonus with tail boost or miss penalty with
    validity floor.
    """
    S = np.asarray(scores, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    is_truth = np.asarray(is_truth, dtype=bool)
    n = len(S)
    K = config.K
    if n < 2 or n <= K:
        raise ValueError(f"group of {n} sequences cannot be shaped with K={K}")
    order = np.argsort(-S, kind="stable")
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(1, n + 1)
    top = rank <= K
    log10 = _log10_table(n)

    v_gap = config.lambda_gap * 1.0
    v_tail = (K * v_gap) / (n - K)
    R = np.zeros(n)
    R += np.where(top, v_gap, -v_tail)
    gap = R.copy()

    invalid = ~valid
    R[invalid] -= config.lambda_fmt
    cnt_bad = int(np.count_nonzero(invalid & top))
    after_fmt = R.copy()

    hit = np.zeros(n)
    rank_part = np.zeros(n)
    rank_star = None
    if is_truth.any():
        rank_star = int(rank[is_truth].min())
        idx = int(order[rank_star - 1])
        rank_bonus = config.lambda_rank / math.log10(rank_star + 1)
        B = rank_bonus
        if rank_star <= K:
            B += config.lambda_hit
            hit[idx] = config.lambda_hit
        else:
            B += config.lambda_hit + v_tail
            hit[idx] = config.lambda_hit + v_tail
        R[idx] += B
        above = rank < rank_star
        penalty = config.lambda_rank / log10[rank[above]]
        R[above] -= penalty
        rank_part[idx] = rank_bonus
        rank_part[above] = -penalty
        pre_floor = R.copy()
        budget = cnt_bad
        for j in order[K:]:
            if budget <= 0:
                break
            if valid[j]:
                R[j] = max(R[j], 1.0)
                budget -= 1
        miss = np.zeros(n)
    else:
        half = rank <= K / 2
        R[half] = np.minimum(R[half], -config.lambda_miss)
        miss = R - after_fmt
        pre_floor = R.copy()
        R[valid] = np.maximum(R[valid], 1.0)
    breakdown = RewardBreakdown(
        ranks=rank,
        gap=gap,
        fmt=after_fmt - gap,
        hit=hit,
        rank=rank_part,
        miss=miss,
        floor=R - pre_floor,
        pre_floor=pre_floor,
        v_gap=v_gap,
        v_tail=v_tail,
        cnt_bad=cnt_bad,
        rank_star=rank_star,
    )
    return R, breakdown


@dataclass
class GroupStats:
    mean_reward: float
    std_reward: float
    hit_rank: int | None = None


def compute_advantages(rewards: Sequence[float], delta: float) -> tuple[np.ndarray, GroupStats]:
    """``(R - mean) / (std + delta)`` with the population std.

    The result is rounded to a 2**-40 grid and re-centered in integer units,
    so it sums to exactly zero in any summation order.
    """
    if not delta > 0:
        raise ValueError("delta must be > 0")
    R = np.asarray(rewards, dtype=np.float64)
    if R.size == 0:
        raise ValueError("empty reward vector")
    n = R.size
    mean = math.fsum(R) / n
    std = math.sqrt(math.fsum((R - mean) ** 2) / n)
    if np.all(R == R[0]):
        return np.zeros(n), GroupStats(mean, 0.0)
    units = np.rint((R - mean) / (std + delta) / ADVANTAGE_GRID)
    units[int(np.argmax(np.abs(units)))] -= units.sum()
    return units * ADVANTAGE_GRID, GroupStats(mean, std)


def _ratio_terms(policy_logprobs, ref_logprobs, eps):
    p = np.asarray(policy_logprobs, dtype=np.float64)
    r = np.asarray(ref_logprobs, dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise ValueError("non-finite policy log-probability")
    if not np.all(np.isfinite(r)):
        raise ValueError("non-finite reference log-probability")
    with np.errstate(over="ignore"):
        ratio = np.exp(p - r)
    return ratio, np.clip(ratio, 1 - eps, 1 + eps)


def grpo_loss(
    policy_logprobs: Sequence[float],
    ref_logprobs: Sequence[float],
    advantages: Sequence[float],
    omega: Sequence[float],
    eps: float,
    ppo_min: bool = False,
) -> float:
    """``-(1/G) * sum(omega * A * clip(pi / pi_ref, 1 - eps, 1 + eps))``."""
    ratio, clipped = _ratio_terms(policy_logprobs, ref_logprobs, eps)
    A = np.asarray(advantages, dtype=np.float64)
    w = np.asarray(omega, dtype=np.float64)
    if ppo_min:
        with np.errstate(invalid="ignore"):
            surrogate = np.minimum(ratio * A, clipped * A)
    else:
        surrogate = clipped * A
    # + 0.0 turns a negative zero into 0.0
    return -float(np.sum(w * surrogate)) / len(A) + 0.0


def grpo_loss_weights(
    policy_logprobs: Sequence[float],
    ref_logprobs: Sequence[float],
    advantages: Sequence[float],
    omega: Sequence[float],
    eps: float,
    ppo_min: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """d(loss)/d(policy log-prob) per sequence, and the mask of clipped ratios.

    A clipped factor is constant in the policy, so its sequences get weight 0.
    """
    ratio, _ = _ratio_terms(policy_logprobs, ref_logprobs, eps)
    A = np.asarray(advantages, dtype=np.float64)
    w = np.asarray(omega, dtype=np.float64)
    inside = (ratio >= 1 - eps) & (ratio <= 1 + eps)
    live = inside
    if ppo_min:
        # min picks the unclipped branch when it is the smaller one
        live = inside | ((ratio * A) <= (np.clip(ratio, 1 - eps, 1 + eps) * A))
    weights = np.where(live, -w * A * ratio / len(A), 0.0)
    return weights, ~inside


@dataclass
class GroupSample:
    input: SuggestionContext
    hypotheses: list[Hypothesis]
    queries: list[str]
    validity: np.ndarray
    truth: str | None = None
    converted: bool = False
    rewards: np.ndarray | None = None
    advantages: np.ndarray | None = None
    breakdown: RewardBreakdown | None = None
    stats: GroupStats | None = None

    @property
    def scores(self) -> np.ndarray:
        return np.array([h.score for h in self.hypotheses])

    @property
    def is_truth(self) -> np.ndarray:
        return np.array(
            [self.truth is not None and h.finished and q == self.truth for h, q in zip(self.hypotheses, self.queries)],
            dtype=bool,
        )

    @property
    def hit(self) -> bool:
        return bool(self.is_truth.any())


def build_group(
    context: SuggestionContext,
    hypotheses: list[Hypothesis],
    vocab: Vocabulary,
    T: int,
    truth: str | None = None,
    converted: bool = False,
) -> GroupSample:
    lead, _ = vocab.encode(context.prefix)
    queries = []
    valid = []
    for h in hypotheses:
        body = [t for t in h.tokens if t not in vocab.stop_ids]
        queries.append(context.prefix + vocab.decode(body))
        valid.append(h.finished and validity_check(lead + body, vocab, max_tokens=len(lead) + T))
    return GroupSample(context, hypotheses, queries, np.array(valid, dtype=bool), truth, converted)


def compute_rewards(group: GroupSample, config: GrpoConfig) -> tuple[np.ndarray, RewardBreakdown]:
    rewards, breakdown = reward_vector(group.scores, group.validity, group.is_truth, config)
    group.rewards = rewards
    group.breakdown = breakdown
    return rewards, breakdown


def group_loss_and_gradient(
    policy: ScorerModel,
    prompt: Sequence[int],
    hypotheses: Sequence[Hypothesis],
    ref_logprobs: Sequence[float],
    advantages: Sequence[float],
    omega: Sequence[float],
    config: GrpoConfig,
) -> tuple[float, Gradient, np.ndarray]:
    policy_lp = [sequence_logprob(policy, prompt, h.tokens) for h in hypotheses]
    loss = grpo_loss(policy_lp, ref_logprobs, advantages, omega, config.eps, config.ppo_min)
    weights, clipped = grpo_loss_weights(policy_lp, ref_logprobs, advantages, omega, config.eps, config.ppo_min)
    grad: Gradient = {}
    for h, w in zip(hypotheses, weights):
        if w != 0.0:
            add_scaled(grad, logprob_gradient(policy, prompt, h.tokens), float(w))
    return loss, grad, clipped


@dataclass
class StepReport:
    step: int
    loss: float
    mean_reward: float
    group_hit_rate: float
    clip_fraction: float
    used: int = 0
    skipped: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


TrainItem = tuple[SuggestionContext, str | None, bool]


def train_step(
    policy: ScorerModel,
    reference: ScorerModel,
    batch: Sequence[TrainItem],
    config: GrpoConfig,
    rng: np.random.Generator | None = None,
    step: int = 0,
) -> StepReport:
    """One GRPO update of ``policy`` in place over a batch of inputs."""
    if not batch:
        raise ValueError("empty batch")
    if rng is None:
        rng = np.random.default_rng(0)
    vocab = policy.vocab
    total_grad: Gradient = {}
    losses, rewards, hits = [], [], []
    clipped = 0
    n_seq = 0
    skipped = 0
    for context, truth, converted in batch:
        prompt = prompt_tokens(context, vocab)
        if config.sampler == "beam":
            hyps = decode_group(policy, prompt, config.G, config.T)
        else:
            hyps = sample_group(policy, prompt, config.G, config.T, rng)
        if len(hyps) <= config.K:
            skipped += 1
            log.info("skipping input %r: group of %d", context.prefix, len(hyps))
            continue
        group = build_group(context, hyps, vocab, config.T, truth, converted)
        compute_rewards(group, config)
        group.advantages, group.stats = compute_advantages(group.rewards, config.delta)
        group.stats.hit_rank = group.breakdown.rank_star
        w = config.lambda_order if converted else 1.0
        omega = np.full(len(hyps), w)
        ref_lp = [sequence_logprob(reference, prompt, h.tokens) for h in hyps]
        loss, grad, clip_mask = group_loss_and_gradient(
            policy, prompt, hyps, ref_lp, group.advantages, omega, config
        )
        losses.append(loss)
        rewards.extend(group.rewards)
        hits.append(group.hit)
        clipped += int(clip_mask.sum())
        n_seq += len(hyps)
        add_scaled(total_grad, grad, 1.0)
    if not losses:
        return StepReport(step, 0.0, 0.0, 0.0, 0.0, 0, skipped)
    batch_loss = float(np.mean(losses))
    if not math.isfinite(batch_loss):
        raise TrainingDivergence(f"non-finite GRPO loss at step {step}: {batch_loss}")
    for g in total_grad.values():
        g /= len(losses)
    policy.apply_gradient(total_grad, config.lr)
    return StepReport(
        step=step,
        loss=batch_loss,
        mean_reward=float(np.mean(rewards)),
        group_hit_rate=float(np.mean(hits)),
        clip_fraction=clipped / n_seq,
        used=len(losses),
        skipped=skipped,
    )


def train_grpo(
    policy: ScorerModel,
    dataset: Sequence[TrainItem],
    config: GrpoConfig,
    epochs: int = 1,
    batch_size: int = 8,
    seed: int = 0,
    on_step: Callable[[StepReport], None] | None = None,
) -> tuple[ScorerModel, list[StepReport]]:
    """GRPO from ``policy`` (left untouched); returns the trained copy and step reports."""
    policy = policy.copy()
    reference = policy.copy()
    rng = np.random.default_rng(seed)
    sample_rng = np.random.default_rng(rng.integers(2**63))
    reports: list[StepReport] = []
    step = 0
    for _ in range(epochs):
        order = rng.permutation(len(dataset))
        for start in range(0, len(order), batch_size):
            batch = [dataset[i] for i in order[start:start + batch_size]]
            report = train_step(policy, reference, batch, config, sample_rng, step)
            reports.append(report)
            if on_step is not None:
                on_step(report)
            step += 1
            if config.ref_sync_every and step % config.ref_sync_every == 0:
                reference = policy.copy()
    return policy, reports

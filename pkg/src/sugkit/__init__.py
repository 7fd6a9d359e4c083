"""Generative query suggestion toolkit.

Candidate mining from click logs, context assembly, a tabular autoregressive
scorer, plain and quality-aware beam search, beam-driven GRPO training, and
offline ranking metrics.
"""

from .config import RunConfig
from .context import SuggestionContext, assemble, parse, prompt_tokens, serialize
from .decoder import DecodeStats, Hypothesis, QabsParams, SuggestionList, beam_search, qa_beam_search
from .evaluator import EvalInstance, EvalReport, diversity, evaluate, hit_rate_at_k, mrr, quality
from .grpo import (
    GrpoConfig,
    GroupSample,
    compute_advantages,
    compute_rewards,
    grpo_loss,
    is_valid_query,
    reward_vector,
    train_grpo,
    validity_check,
)
from .miner import CandidateIndex, ClickLogRecord, CooccurrenceCounts, build_index, ingest_logs, lookup, slide_window
from .scorer import ScorerModel, generation_mask, logprob_gradient, prune_head, score_next, sequence_logprob, sft_train
from .textnorm import normalize_query
from .vocab import Vocabulary

__version__ = "0.1.0"

__all__ = [
    "CandidateIndex",
    "ClickLogRecord",
    "CooccurrenceCounts",
    "DecodeStats",
    "EvalInstance",
    "EvalReport",
    "GroupSample",
    "GrpoConfig",
    "Hypothesis",
    "QabsParams",
    "RunConfig",
    "ScorerModel",
    "SuggestionContext",
    "SuggestionList",
    "Vocabulary",
    "assemble",
    "beam_search",
    "build_index",
    "compute_advantages",
    "compute_rewards",
    "diversity",
    "evaluate",
    "generation_mask",
    "grpo_loss",
    "hit_rate_at_k",
    "ingest_logs",
    "is_valid_query",
    "logprob_gradient",
    "lookup",
    "mrr",
    "normalize_query",
    "parse",
    "prompt_tokens",
    "prune_head",
    "qa_beam_search",
    "quality",
    "reward_vector",
    "score_next",
    "sequence_logprob",
    "serialize",
    "sft_train",
    "slide_window",
    "train_grpo",
    "validity_check",
]

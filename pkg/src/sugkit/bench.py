"""Latency/quality grids over decoding settings.

Every grid point decodes the whole eval set once and records wall-clock
latency, model-call counts and the four offline metrics.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .context import assemble
from .decoder import QabsParams
from .evaluator import EvalInstance, decode_instance, metrics
from .miner import CandidateIndex
from .scorer import ScorerModel, prune_head, token_frequencies

SCENARIOS = ("qabs_vs_vanilla", "prune_grid", "beam_width_grid", "candidate_grid")


class InvariantViolation(RuntimeError):
    """A property that holds by construction failed at runtime."""


CSV_FIELDS = (
    "scenario",
    "axis",
    "value",
    "latency_mean_ms",
    "latency_p50_ms",
    "latency_p99_ms",
    "model_calls_total",
    "model_calls_mean",
    "hr_at_k",
    "mrr",
    "div",
    "qua",
    "n_instances",
)


@dataclass
class BenchPoint:
    value: str | int
    latency_mean_ms: float
    latency_p50_ms: float
    latency_p99_ms: float
    model_calls_total: int
    model_calls_mean: float
    hr_at_k: float
    mrr: float
    div: float
    qua: float
    n_instances: int
    # per-instance model calls, in eval-set order
    calls: list[int] = field(default_factory=list, repr=False)


@dataclass
class BenchReport:
    scenario: str
    axis: str
    points: list[BenchPoint]

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "axis": self.axis, "points": [asdict(p) for p in self.points]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for p in self.points:
            row = {k: v for k, v in asdict(p).items() if k in CSV_FIELDS}
            w.writerow({"scenario": self.scenario, "axis": self.axis, **row})
        return buf.getvalue()


def run_point(
    model: ScorerModel,
    index: CandidateIndex | None,
    instances: Sequence[EvalInstance],
    params: QabsParams,
    value,
    vanilla: bool = False,
    m: int = 10,
    n: int = 10,
) -> BenchPoint:
    lat: list[float] = []
    calls: list[int] = []
    lists: list[list[str]] = []
    for inst in instances:
        ctx = inst.context
        if index is not None:
            ctx = assemble(ctx.prefix, ctx.city, index, ctx.hot_words, ctx.behavior_history, ctx.user_profile, m=m, n=n)
        t0 = time.perf_counter()
        entries, stats = decode_instance(model, ctx, params, vanilla)
        lat.append((time.perf_counter() - t0) * 1e3)
        calls.append(stats.model_calls)
        lists.append([q for q, _ in entries])
    met = metrics([i.truth for i in instances], lists, params.K, model.vocab)
    lat_a = np.array(lat)
    return BenchPoint(
        value=value,
        latency_mean_ms=float(lat_a.mean()),
        latency_p50_ms=float(np.percentile(lat_a, 50)),
        latency_p99_ms=float(np.percentile(lat_a, 99)),
        model_calls_total=int(sum(calls)),
        model_calls_mean=sum(calls) / len(calls),
        hr_at_k=met["hr_at_k"],
        mrr=met["mrr"],
        div=met["div"],
        qua=met["qua"],
        n_instances=len(instances),
        calls=calls,
    )


def run_bench(
    scenario: str,
    model: ScorerModel,
    instances: Sequence[EvalInstance],
    params: QabsParams,
    index: CandidateIndex | None = None,
    grid: Sequence[int] | None = None,
    m: int = 10,
    n: int = 10,
    frequencies: Mapping[int, int] | None = None,
) -> BenchReport:
    """Run one scenario. ``grid`` overrides the default axis values.

    ``prune_grid`` ranks tokens by ``frequencies``; without them the eval
    truths are counted.
    """
    if not instances:
        raise ValueError("bench needs at least one eval instance")
    if scenario == "qabs_vs_vanilla":
        points = [
            run_point(model, index, instances, params, "vanilla", vanilla=True, m=m, n=n),
            run_point(model, index, instances, params, "qabs", m=m, n=n),
        ]
        over = [i for i, (a, b) in enumerate(zip(points[0].calls, points[1].calls)) if b > a]
        if over:
            raise InvariantViolation(f"QA-BS used more model calls than vanilla on instances {over[:10]}")
        return BenchReport(scenario, "decoder", points)
    if scenario == "prune_grid":
        V = len(model.vocab)
        floor = len(model.vocab.reserved | model.vocab.stop_ids)
        values = list(grid) if grid else sorted({V, max(floor, (V + floor) // 2), floor + max(1, (V - floor) // 4)}, reverse=True)
        freqs = frequencies if frequencies is not None else token_frequencies(
            model.vocab.encode(i.truth)[0] for i in instances
        )
        points = [
            run_point(prune_head(model, freqs, v), index, instances, params, v, m=m, n=n) for v in values
        ]
        return BenchReport(scenario, "top_n", points)
    if scenario == "beam_width_grid":
        values = list(grid) if grid else [k for k in (12, 10, 8, 6, 4, 2) if k <= max(params.K, params.K_search)]
        points = [
            run_point(model, index, instances, replace(params, K=k, K_search=k), k, m=m, n=n) for k in values
        ]
        return BenchReport(scenario, "K", points)
    if scenario == "candidate_grid":
        values = list(grid) if grid else [0, 2, 5, 10, 20]
        points = [run_point(model, index, instances, params, v, m=v, n=n) for v in values]
        return BenchReport(scenario, "m", points)
    raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")

"""Run configuration: every tunable in one flat, JSON-backed record."""

from __future__ import annotations

import json
import math
import os
import zlib
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .decoder import QabsParams
from .grpo import GrpoConfig

ENV_VAR = "SUGKIT_CONFIG"


class ConfigError(ValueError):
    """Unknown key, bad type, or a value outside its module's invariants."""


@dataclass(frozen=True)
class RunConfig:
    # context assembly
    m: int = 10
    n: int = 10
    # decoding
    K: int = 12
    T: int = 15
    tau: float = -15.0
    alpha: float = 1.8
    R_min: float = 4
    K_win: int = 15
    K_search: int = 12
    # reward and optimisation
    G: int = 16
    eps: float = 0.1
    delta: float = 1e-4
    lambda_gap: float = 1.0
    lambda_hit: float = 1.0
    lambda_rank: float = 2.0
    lambda_fmt: float = 4.0
    lambda_miss: float = 1.0
    lambda_order: float = 1.5
    lr: float = 2e-6
    beta: float = 0.0
    sampler: str = "beam"
    ppo_min: bool = False
    ref_sync_every: int = 0
    epochs: int = 1
    batch_size: int = 8
    # model and mining
    order: int = 3
    window_days: int = 7
    top_n: int | None = None
    # paths
    logs: str | None = None
    index: str | None = None
    checkpoint: str | None = None
    seed_checkpoint: str | None = None
    dataset: str | None = None
    eval_dataset: str | None = None
    reports: str | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        for f in fields(self):
            object.__setattr__(self, f.name, _coerce(f, getattr(self, f.name)))
        self.validate()

    def validate(self) -> None:
        for name in ("m", "n", "epochs", "batch_size", "order", "window_days"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(f"{name} must be an integer")
        if self.m < 0 or self.n < 0:
            raise ConfigError("m and n must be >= 0")
        if self.epochs < 0 or self.batch_size < 1 or self.order < 1 or self.window_days < 1:
            raise ConfigError("epochs >= 0, batch_size >= 1, order >= 1, window_days >= 1")
        if self.top_n is not None and self.top_n < 1:
            raise ConfigError("top_n must be >= 1")
        if not (math.isfinite(self.lr) and self.lr >= 0):
            raise ConfigError("lr must be finite and >= 0")
        try:
            self.decode_params()
            self.grpo_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def decode_params(self) -> QabsParams:
        return QabsParams(
            K=self.K, T=self.T, tau=self.tau, alpha=self.alpha, R_min=self.R_min, K_search=self.K_search, K_win=self.K_win
        )

    def grpo_config(self) -> GrpoConfig:
        return GrpoConfig(
            K=self.K,
            G=self.G,
            T=self.T,
            eps=self.eps,
            delta=self.delta,
            lambda_gap=self.lambda_gap,
            lambda_hit=self.lambda_hit,
            lambda_rank=self.lambda_rank,
            lambda_fmt=self.lambda_fmt,
            lambda_miss=self.lambda_miss,
            lambda_order=self.lambda_order,
            beta=self.beta,
            lr=self.lr,
            sampler=self.sampler,
            ppo_min=self.ppo_min,
            ref_sync_every=self.ref_sync_every,
        )

    def rng(self, stream: str) -> np.random.Generator:
        """Independent generator for a named purpose, derived from ``seed``."""
        return np.random.default_rng([self.seed, zlib.crc32(stream.encode())])

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(d) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        return cls(**{k: _coerce(known[k], v) for k, v in d.items()})

    def override(self, **kw) -> RunConfig:
        kw = {k: v for k, v in kw.items() if v is not None}
        known = {f.name: f for f in fields(self)}
        try:
            return replace(self, **{k: _coerce(known[k], v) for k, v in kw.items()})
        except KeyError as exc:
            raise ConfigError(f"unknown config key {exc}") from None

    def save(self, path: str | os.PathLike) -> None:
        data = {k: _spell(v) for k, v in self.to_dict().items()}
        Path(path).write_text(json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | os.PathLike) -> RunConfig:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(data)

    @classmethod
    def default(cls) -> RunConfig:
        """Config named by the environment variable, else built-in defaults."""
        path = os.environ.get(ENV_VAR)
        return cls.load(path) if path else cls()


def _spell(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _coerce(f, v):
    if f.type != "float":
        return v
    # strict JSON has no infinity literal; accept it spelled as a string
    if isinstance(v, str) and v.lower().lstrip("+-") in ("inf", "infinity"):
        return float(v)
    if isinstance(v, int) and not isinstance(v, bool):
        return float(v)
    return v

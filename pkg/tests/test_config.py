import json
import math

import pytest

from sugkit.config import ENV_VAR, ConfigError, RunConfig


def test_defaults_carry_the_production_settings():
    cfg = RunConfig()
    assert (cfg.K, cfg.G, cfg.T, cfg.K_search, cfg.K_win) == (12, 16, 15, 12, 15)
    assert (cfg.tau, cfg.alpha, cfg.R_min) == (-15.0, 1.8, 4)
    assert (cfg.eps, cfg.delta, cfg.beta, cfg.lr) == (0.1, 1e-4, 0.0, 2e-6)
    assert (cfg.lambda_gap, cfg.lambda_hit, cfg.lambda_rank, cfg.lambda_fmt, cfg.lambda_miss, cfg.lambda_order) == (
        1.0, 1.0, 2.0, 4.0, 1.0, 1.5
    )
    assert (cfg.m, cfg.n, cfg.window_days) == (10, 10, 7)


def test_round_trip(tmp_path):
    cfg = RunConfig(K=6, K_search=6, tau=-math.inf, alpha=math.inf, dataset="d.jsonl", seed=9)
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    cfg.save(p1)
    again = RunConfig.load(p1)
    again.save(p2)
    assert again == cfg and RunConfig.load(p2) == cfg
    assert p1.read_bytes() == p2.read_bytes()


def test_infinity_spelled_as_string(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"tau": "-inf", "R_min": "inf", "alpha": 2}))
    cfg = RunConfig.load(p)
    assert cfg.tau == -math.inf and cfg.R_min == math.inf and cfg.alpha == 2.0


def test_unknown_keys_and_bad_values_rejected(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"beam": 3})
    with pytest.raises(ConfigError):
        RunConfig(G=12)  # G must exceed K
    with pytest.raises(ConfigError):
        RunConfig(beta=0.1)
    with pytest.raises(ConfigError):
        RunConfig(m=-1)
    with pytest.raises(ConfigError):
        RunConfig(lr=math.nan)
    with pytest.raises(ConfigError):
        RunConfig(epochs=1.5)
    p = tmp_path / "bad.json"
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        RunConfig.load(p)


def test_overrides_skip_none():
    cfg = RunConfig().override(K=4, K_search=4, tau=None)
    assert cfg.K == 4 and cfg.tau == -15.0
    with pytest.raises(ConfigError):
        RunConfig().override(nope=1)


def test_environment_variable_names_the_default(tmp_path, monkeypatch):
    p = tmp_path / "env.json"
    RunConfig(seed=42).save(p)
    monkeypatch.setenv(ENV_VAR, str(p))
    assert RunConfig.default().seed == 42
    monkeypatch.delenv(ENV_VAR)
    assert RunConfig.default() == RunConfig()


def test_named_streams_are_reproducible_and_distinct():
    cfg = RunConfig(seed=3)
    assert cfg.rng("sft").integers(2**31) == RunConfig(seed=3).rng("sft").integers(2**31)
    assert cfg.rng("sft").integers(2**31) != cfg.rng("grpo").integers(2**31)


def test_module_params_follow_the_config():
    cfg = RunConfig(K=4, K_search=5, G=8, sampler="random")
    assert cfg.decode_params().K_search == 5
    assert cfg.grpo_config().G == 8 and cfg.grpo_config().sampler == "random"

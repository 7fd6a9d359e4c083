"""``sugkit`` command line: mine, train, suggest, eval, bench.

Exit codes: 0 success, 2 input error, 3 training divergence, 4 runtime
invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path
from typing import Sequence

from .bench import SCENARIOS, InvariantViolation, run_bench
from .config import ENV_VAR, ConfigError, RunConfig
from .context import assemble
from .data import read_eval_set, read_train_set, sft_pairs, vocab_for
from .evaluator import SLICES, decode_instance, evaluate
from .grpo import train_grpo
from .miner import CandidateIndex, MalformedRecord, build_index, ingest_logs, read_jsonl, write_jsonl
from .scorer import ScorerModel, TrainingDivergence, generation_mask, prune_head, sft_train, token_frequencies

log = logging.getLogger("sugkit")

EXIT_OK, EXIT_INPUT, EXIT_DIVERGED, EXIT_INVARIANT = 0, 2, 3, 4


class InputError(Exception):
    pass


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {s!r}")


def _optional_int(s: str) -> int | None:
    return None if s.lower() in ("none", "") else int(s)


_PARSERS = {"int": int, "float": float, "str": str, "bool": _parse_bool, "int | None": _optional_int, "str | None": str}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help=f"JSON config file (default: ${ENV_VAR}, else built-in defaults)")
    g = p.add_argument_group("config overrides")
    for f in fields(RunConfig):
        g.add_argument(f"--{f.name}", type=_PARSERS[f.type], default=None, metavar=f.type.split()[0].upper())


def _config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig.default()
    return cfg.override(**{f.name: getattr(args, f.name) for f in fields(RunConfig)})


def _need(cfg: RunConfig, key: str) -> Path:
    value = getattr(cfg, key)
    if not value:
        raise InputError(f"--{key} is required")
    path = Path(value)
    if not path.exists():
        raise InputError(f"{key} file not found: {path}")
    return path


def _out(cfg: RunConfig, key: str) -> Path:
    value = getattr(cfg, key)
    if not value:
        raise InputError(f"--{key} (output path) is required")
    return Path(value)


def _load_index(cfg: RunConfig) -> CandidateIndex | None:
    return CandidateIndex.load(_need(cfg, "index")) if cfg.index else None


def _load_model(cfg: RunConfig, key: str = "checkpoint") -> ScorerModel:
    model = ScorerModel.load(_need(cfg, key))
    if cfg.top_n is not None:
        if not cfg.dataset:
            raise InputError("--top_n needs --dataset to count token frequencies")
        items = read_train_set(_need(cfg, "dataset"))
        freqs = token_frequencies(model.vocab.encode(t)[0] for _, t, _ in items if t)
        model = prune_head(model, freqs, cfg.top_n)
    return model


def cmd_mine(cfg: RunConfig, args: argparse.Namespace) -> int:
    rows = list(read_jsonl(_need(cfg, "logs")))
    days = [d["day"] for d in rows if isinstance(d.get("day"), int)]
    end = args.day if args.day is not None else (max(days) if days else 0)
    counts = ingest_logs(rows, (end - cfg.window_days + 1, end))
    index = build_index(counts, cfg.window_days)
    index.save(_out(cfg, "index"))
    summary = {
        "records": len(rows),
        "rejected": counts.rejected,
        "window": [end - cfg.window_days + 1, end],
        "prefixes": len(index.global_lists),
        "pairs": sum(len(v) for v in index.global_lists.values()),
    }
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _reassemble(items, index, cfg):
    if index is None:
        return items
    return [
        (assemble(c.prefix, c.city, index, c.hot_words, c.behavior_history, c.user_profile, m=cfg.m, n=cfg.n), t, conv)
        for c, t, conv in items
    ]


def cmd_train(cfg: RunConfig, args: argparse.Namespace) -> int:
    items = _reassemble(read_train_set(_need(cfg, "dataset")), _load_index(cfg), cfg)
    if not items:
        raise InputError("training dataset is empty")
    out = _out(cfg, "checkpoint")
    reports: list[dict] = []
    if args.mode == "sft":
        if cfg.seed_checkpoint:
            model = ScorerModel.load(_need(cfg, "seed_checkpoint"))
        else:
            vocab = vocab_for(items)
            model = ScorerModel(vocab, cfg.order, active=generation_mask(vocab))
        pairs = sft_pairs(items, model.vocab)
        if not pairs:
            raise InputError("no usable SFT pairs (every truth must extend its prefix)")
        seed = int(cfg.rng("sft").integers(2**31))
        model, losses = sft_train(model, pairs, cfg.epochs, cfg.lr, batch_size=cfg.batch_size, seed=seed)
        reports = [{"epoch": i, "loss": v} for i, v in enumerate(losses)]
    else:
        policy = _load_model(cfg, "seed_checkpoint")
        seed = int(cfg.rng("grpo").integers(2**31))
        model, steps = train_grpo(
            policy, items, cfg.grpo_config(), epochs=cfg.epochs, batch_size=cfg.batch_size, seed=seed
        )
        reports = [r.to_dict() for r in steps]
    model.save(out)
    if cfg.reports:
        write_jsonl(cfg.reports, reports)
    print(json.dumps({"checkpoint": str(out), "mode": args.mode, "reports": len(reports)}, sort_keys=True))
    return EXIT_OK


def _read_user(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise InputError(f"user fixture not found: {p}")
    data = json.loads(p.read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise InputError("user fixture must be a JSON object with hot_words/history/profile lists")
    return data


def cmd_suggest(cfg: RunConfig, args: argparse.Namespace) -> int:
    model = _load_model(cfg)
    index = _load_index(cfg)
    user = _read_user(args.user)
    ctx = assemble(
        args.prefix,
        args.city,
        index,
        user.get("hot_words", ()),
        user.get("history", ()),
        user.get("profile", ()),
        m=cfg.m,
        n=cfg.n,
    )
    entries, stats = decode_instance(model, ctx, cfg.decode_params(), vanilla=args.vanilla)
    for rank, (q, s) in enumerate(entries, 1):
        print(f"{rank}\t{q}\t{s:.6f}")
    if args.stats:
        print(stats.to_json())
    return EXIT_OK


def cmd_eval(cfg: RunConfig, args: argparse.Namespace) -> int:
    model = _load_model(cfg)
    index = _load_index(cfg)
    instances = read_eval_set(_need(cfg, "eval_dataset"))
    dump: list | None = [] if args.dump else None
    report = evaluate(
        model, index, instances, cfg.decode_params(), slices=SLICES, m=cfg.m, n=cfg.n, vanilla=args.vanilla, dump=dump
    )
    for name, value in (("hr_at_k", report.hr_at_k), ("mrr", report.mrr), ("div", report.div), ("qua", report.qua)):
        if not 0.0 <= value <= 1.0:
            raise InvariantViolation(f"{name}={value} outside [0, 1]")
    if report.mrr > report.hr_at_k:
        raise InvariantViolation(f"MRR {report.mrr} exceeds HR@K {report.hr_at_k}")
    if args.dump:
        write_jsonl(args.dump, dump)
    if cfg.reports:
        Path(cfg.reports).write_text(report.to_json() + "\n", encoding="utf-8")
    print(report.to_json())
    return EXIT_OK


def cmd_bench(cfg: RunConfig, args: argparse.Namespace) -> int:
    model = ScorerModel.load(_need(cfg, "checkpoint"))
    index = _load_index(cfg)
    instances = read_eval_set(_need(cfg, "eval_dataset"))
    freqs = None
    if cfg.dataset:
        items = read_train_set(_need(cfg, "dataset"))
        freqs = token_frequencies(model.vocab.encode(t)[0] for _, t, _ in items if t)
    grid = [int(x) for x in args.grid.split(",")] if args.grid else None
    report = run_bench(
        args.scenario, model, instances, cfg.decode_params(), index, grid, m=cfg.m, n=cfg.n, frequencies=freqs
    )
    if cfg.reports:
        Path(cfg.reports).write_text(report.to_json() + "\n", encoding="utf-8")
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    print(report.to_csv(), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sugkit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mine", help="build the candidate index from click logs")
    p.add_argument("--day", type=int, help="last day of the window (default: latest day in the log)")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("train", help="SFT seeding or GRPO fine-tuning")
    p.add_argument("--mode", choices=("sft", "grpo"), required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("suggest", help="rank suggestions for one prefix")
    p.add_argument("--prefix", required=True)
    p.add_argument("--city", default="")
    p.add_argument("--user", help="JSON object with hot_words, history and profile lists")
    p.add_argument("--stats", action="store_true", help="print decode statistics as a final JSON line")
    p.add_argument("--vanilla", action="store_true", help="plain beam search instead of QA-BS")
    p.set_defaults(func=cmd_suggest)

    p = sub.add_parser("eval", help="offline metrics over an eval set")
    p.add_argument("--dump", help="write per-instance ranked lists to this JSON-lines file")
    p.add_argument("--vanilla", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="latency/quality grid")
    p.add_argument("--scenario", choices=SCENARIOS, required=True)
    p.add_argument("--grid", help="comma-separated axis values")
    p.add_argument("--csv", help="also write the CSV here")
    p.set_defaults(func=cmd_bench)

    for action in sub.choices.values():
        _add_config_flags(action)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        return args.func(cfg, args)
    except TrainingDivergence as exc:
        print(f"sugkit: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except InvariantViolation as exc:
        print(f"sugkit: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (InputError, ConfigError, MalformedRecord, OSError, KeyError, ValueError) as exc:
        print(f"sugkit: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

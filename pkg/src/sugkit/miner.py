"""Prefix -> query candidate mining from click logs.

Counts clicks per (prefix, city, query) over a trailing window of days and
serves city-first candidate lists with global backfill.
"""

from __future__ import annotations

import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .textnorm import normalize_query

log = logging.getLogger(__name__)

INDEX_VERSION = 1
DEFAULT_WINDOW_DAYS = 7


class WindowOrderError(ValueError):
    """New records are not strictly later than everything already ingested."""


class MalformedRecord(ValueError):
    pass


@dataclass(frozen=True)
class ClickLogRecord:
    day: int
    city: str
    prefix: str
    query: str
    clicked: bool = False
    ordered: bool = False

    def __post_init__(self) -> None:
        if not self.prefix or not self.query:
            raise MalformedRecord("prefix and query must be non-empty")
        if self.ordered and not self.clicked:
            raise MalformedRecord("ordered implies clicked")

    @classmethod
    def from_dict(cls, d: dict) -> ClickLogRecord:
        try:
            return cls(
                day=int(d["day"]),
                city=str(d["city"]),
                prefix=str(d["prefix"]),
                query=str(d["query"]),
                clicked=bool(d["clicked"]),
                ordered=bool(d["ordered"]),
            )
        except KeyError as exc:
            raise MalformedRecord(f"missing field {exc}") from None

    def to_dict(self) -> dict:
        return {
            "day": self.day,
            "city": self.city,
            "prefix": self.prefix,
            "query": self.query,
            "clicked": self.clicked,
            "ordered": self.ordered,
        }


@dataclass
class CooccurrenceCounts:
    # (prefix, city, query) -> clicks inside the window
    city: Counter = field(default_factory=Counter)
    # day -> deltas contributed by that day, kept for eviction
    per_day: dict[int, Counter] = field(default_factory=dict)
    rejected: int = 0
    # latest day covered so far, with or without clicks
    last_day: int | None = None

    @property
    def global_counts(self) -> Counter:
        out: Counter = Counter()
        for (prefix, _city, query), n in self.city.items():
            out[prefix, query] += n
        return out

    @property
    def days(self) -> list[int]:
        return sorted(self.per_day)

    def count(self, prefix: str, city: str, query: str) -> int:
        return self.city.get((prefix, city, query), 0)

    def global_count(self, prefix: str, query: str) -> int:
        return self.global_counts.get((prefix, query), 0)

    def _add_day(self, day: int, delta: Counter) -> None:
        if not delta:
            return
        self.per_day.setdefault(day, Counter()).update(delta)
        self.city.update(delta)

    def _evict_day(self, day: int) -> None:
        delta = self.per_day.pop(day, None)
        if not delta:
            return
        for key, n in delta.items():
            left = self.city[key] - n
            if left < 0:
                raise AssertionError(f"eviction drove count negative for {key}")
            if left:
                self.city[key] = left
            else:
                del self.city[key]

    def same_counts(self, other: CooccurrenceCounts) -> bool:
        return +self.city == +other.city


def _day_delta(records: Iterable[ClickLogRecord]) -> Counter:
    delta: Counter = Counter()
    for r in records:
        if r.clicked:
            delta[r.prefix, r.city, r.query] += 1
    return delta


def ingest_logs(records: Iterable[ClickLogRecord | dict], window: tuple[int, int]) -> CooccurrenceCounts:
    """Count clicked records whose day lies in the inclusive ``window``.

    Dicts are parsed as they arrive; malformed ones are rejected and counted
    in ``counts.rejected`` without stopping ingestion.
    """
    lo, hi = window
    if lo > hi:
        raise ValueError(f"empty window {window}")
    counts = CooccurrenceCounts()
    by_day: dict[int, list[ClickLogRecord]] = defaultdict(list)
    for r in records:
        if isinstance(r, dict):
            try:
                r = ClickLogRecord.from_dict(r)
            except (MalformedRecord, TypeError, ValueError) as exc:
                counts.rejected += 1
                log.warning("rejected log record: %s", exc)
                continue
        if lo <= r.day <= hi:
            by_day[r.day].append(r)
    for day in sorted(by_day):
        counts._add_day(day, _day_delta(by_day[day]))
    counts.last_day = hi
    return counts


def slide_window(
    counts: CooccurrenceCounts,
    new_day_records: Sequence[ClickLogRecord],
    retention: int = DEFAULT_WINDOW_DAYS,
    day: int | None = None,
) -> CooccurrenceCounts:
    """Add one new day and evict days older than the trailing ``retention`` days.

    ``day`` names the new day when ``new_day_records`` is empty. Returns a new
    object; ``counts`` is not modified.
    """
    if retention < 1:
        raise ValueError("retention must be >= 1")
    days = {r.day for r in new_day_records}
    if len(days) > 1:
        raise WindowOrderError(f"new records span several days: {sorted(days)}")
    if days:
        new_day = days.pop()
        if day is not None and day != new_day:
            raise WindowOrderError(f"records are for day {new_day}, not {day}")
    elif day is not None:
        new_day = day
    else:
        raise ValueError("day is required when there are no new records")
    if counts.last_day is not None and new_day <= counts.last_day:
        raise WindowOrderError(f"day {new_day} is not after already ingested day {counts.last_day}")

    out = CooccurrenceCounts(
        city=Counter(counts.city),
        per_day={d: Counter(c) for d, c in counts.per_day.items()},
        rejected=counts.rejected,
        last_day=new_day,
    )
    out._add_day(new_day, _day_delta(new_day_records))
    for old in [d for d in out.per_day if d <= new_day - retention]:
        out._evict_day(old)
    return out


def _ranked(counter: Counter) -> list[tuple[str, int]]:
    # count descending, then normalized bytes; raw bytes keep the order total
    return sorted(
        ((q, n) for q, n in counter.items() if n > 0),
        key=lambda x: (-x[1], normalize_query(x[0]).encode("utf-8"), x[0].encode("utf-8")),
    )


@dataclass(frozen=True)
class CandidateIndex:
    """Immutable per-prefix candidate lists. Safe for concurrent lookup."""

    city_lists: dict[str, dict[str, list[tuple[str, int]]]]
    global_lists: dict[str, list[tuple[str, int]]]
    window_days: int = DEFAULT_WINDOW_DAYS
    built_at_day: int | None = None

    def to_dict(self) -> dict:
        return {
            "version": INDEX_VERSION,
            "window_days": self.window_days,
            "built_at_day": self.built_at_day,
            "city_lists": {
                p: {c: [[q, n] for q, n in lst] for c, lst in sorted(cities.items())}
                for p, cities in sorted(self.city_lists.items())
            },
            "global_lists": {p: [[q, n] for q, n in lst] for p, lst in sorted(self.global_lists.items())},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> CandidateIndex:
        if d.get("version") != INDEX_VERSION:
            raise ValueError(f"unsupported index version {d.get('version')!r}")
        return cls(
            city_lists={
                p: {c: [(q, int(n)) for q, n in lst] for c, lst in cities.items()}
                for p, cities in d["city_lists"].items()
            },
            global_lists={p: [(q, int(n)) for q, n in lst] for p, lst in d["global_lists"].items()},
            window_days=int(d["window_days"]),
            built_at_day=d["built_at_day"],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> CandidateIndex:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def build_index(counts: CooccurrenceCounts, window_days: int = DEFAULT_WINDOW_DAYS) -> CandidateIndex:
    per_city: dict[str, dict[str, Counter]] = defaultdict(lambda: defaultdict(Counter))
    per_prefix: dict[str, Counter] = defaultdict(Counter)
    for (prefix, city, query), n in counts.city.items():
        if n > 0:
            per_city[prefix][city][query] += n
            per_prefix[prefix][query] += n
    return CandidateIndex(
        city_lists={p: {c: _ranked(q) for c, q in cities.items()} for p, cities in per_city.items()},
        global_lists={p: _ranked(q) for p, q in per_prefix.items()},
        window_days=window_days,
        built_at_day=counts.last_day,
    )


def lookup(index: CandidateIndex, prefix: str, city: str, m: int) -> list[str]:
    """City list first, then global backfill, no duplicates, at most ``m`` queries."""
    if m < 0:
        raise ValueError("m must be >= 0")
    out: list[str] = []
    seen: set[str] = set()
    city_list = index.city_lists.get(prefix, {}).get(city, [])
    for source in (city_list, index.global_lists.get(prefix, [])):
        for query, _ in source:
            if len(out) >= m:
                return out
            if query not in seen:
                seen.add(query)
                out.append(query)
    return out


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                log.warning("%s:%d: bad JSON (%s)", path, lineno, exc)
                yield {"_malformed": line}


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def read_logs(path: str | Path) -> list[dict]:
    return list(read_jsonl(path))

"""
Mining candidates from click logs
=================================

Count clicked (prefix, city, query) triples over a trailing window, slide the
window one day forward, and look up candidates city-first.
"""

from sugkit.miner import build_index, ingest_logs, lookup, slide_window
from sugkit.synthetic import make_click_logs

records = make_click_logs(seed=0, days=range(1, 9))

# one week of logs, days 1..7
counts = ingest_logs([r for r in records if r.day <= 7], (1, 7))
print("clicked triples in week 1:", sum(counts.city.values()))

# day 8 arrives: add it and evict day 1 without recounting the week
counts = slide_window(counts, [r for r in records if r.day == 8], retention=7)
print("same as a fresh count of days 2..8:", counts.same_counts(ingest_logs(records, (2, 8))))

index = build_index(counts)
prefix = max(index.global_lists, key=lambda p: len(index.global_lists[p]))
for city in ("BJ", "MO", "nowhere"):
    print(f"{prefix!r} in {city}:", lookup(index, prefix, city, m=5))

"""Query normalization used for duplicate detection."""

from __future__ import annotations

import re
import string

# ASCII punctuation block plus common CJK / full-width punctuation
CJK_PUNCTUATION = (
    "、。「」『』〈〉《》【】"
    "〔〕〜・"
    "！（），．：；？［］｛｝～"
    "‘’“”…—·"
)
PUNCTUATION = frozenset(string.punctuation + CJK_PUNCTUATION)

_TABLE = {ord(c): None for c in PUNCTUATION}
_WS = re.compile(r"\s+")


def normalize_query(q: str) -> str:
    """Lowercase, drop punctuation, trim, and collapse whitespace runs.

    >>> normalize_query("  Pizza  Hut! ")
    'pizza hut'
    """
    return _WS.sub(" ", q.lower().translate(_TABLE)).strip()

"""Shared tokenizer and string normalization.

Every token-count threshold, BM25 query, and string-equality test in the
toolkit goes through this module so that "token" and "matches" mean the
same thing everywhere.
"""

from __future__ import annotations

import re
import unicodedata

# Maximal runs of Unicode alphanumerics (\w minus underscore).
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

# Dash variants folded to ASCII "-" for matching: hyphen, non-breaking
# hyphen, figure dash, en dash, em dash, horizontal bar, minus sign.
_DASH_RE = re.compile("[‐‑‒–—―−]")

_WS_RE = re.compile(r"\s+")


def tokenize(text: str) -> list[str]:
    """Lowercased NFC tokens: maximal runs of alphanumeric characters."""
    normalized = unicodedata.normalize("NFC", text).lower()
    return _TOKEN_RE.findall(normalized)


def token_spans(text: str) -> list[tuple[int, int]]:
    """(start, end) offsets of token runs in the *raw* text.

    Offsets index the unnormalized input so callers can slice it; use
    :func:`tokenize` when only the token values matter.
    """
    return [m.span() for m in _TOKEN_RE.finditer(text)]


def collapse_ws(text: str) -> str:
    """Collapse whitespace runs to single spaces and strip the ends."""
    return _WS_RE.sub(" ", text).strip()


def normalize_match_text(text: str) -> str:
    """Canonical form used for all string matching.

    NFC, lowercase, dash variants folded to "-", whitespace collapsed.
    """
    s = unicodedata.normalize("NFC", text).lower()
    s = _DASH_RE.sub("-", s)
    return collapse_ws(s)


def truncate_tokens(text: str, limit: int | None) -> str:
    """Clip ``text`` after its ``limit``-th token (None = no limit)."""
    if limit is None:
        return text
    if limit <= 0:
        return ""
    spans = token_spans(text)
    if len(spans) <= limit:
        return text
    return text[: spans[limit - 1][1]]

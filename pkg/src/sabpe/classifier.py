"""Rule-based categories for (under-trained) tokens.

Rules are tried in order and the first match wins:

1. special tokens, ``<...>``
2. digit sequences with an optional ``+``/``-`` sign
3. punctuation, when more than 80% of the characters are punctuation
4. variable or function names: underscore-joined words, or a Latin word with
   at least one capital that is not entirely upper case
5. all-caps Latin words
6. other Latin words
7. tokens containing non-Latin characters
8. everything else
"""

from __future__ import annotations

import csv
import enum
import io
import json
import re
import string
import unicodedata
from collections.abc import Iterable
from dataclasses import dataclass


class TokenCategory(str, enum.Enum):
    SpecialToken = "Special tokens"
    DigitsAndNumbers = "Digits and numbers"
    Punctuation = "Punctuation"
    VariableOrFunctionName = "Full or partial variable or function names"
    AllCapsLatin = "ALL-CAPS Latin words"
    OtherLatin = "Other Latin words"
    NonLatin = "Non-Latin words or characters"
    Other = "Other"


_SPECIAL = re.compile(r"<[^>]+>")
_NUMBER = re.compile(r"[+-]?\d+")
_CAMEL = re.compile(r"[a-zA-Z]*[A-Z][a-zA-Z]*")
_ASCII_WORD = re.compile(r"[A-Za-z]+")
_PUNCT = frozenset(string.punctuation)


def _is_punct(c: str) -> bool:
    return c in _PUNCT or unicodedata.category(c).startswith("P")


def _is_latin_letter(c: str) -> bool:
    if c.isascii():
        return c.isalpha()
    return c.isalpha() and "LATIN" in unicodedata.name(c, "")


def _is_non_latin(c: str) -> bool:
    if c.isascii() or _is_latin_letter(c):
        return False
    return unicodedata.category(c)[0] not in "PZC"


def _underscore_words(s: str) -> bool:
    if "_" not in s:
        return False
    parts = [p for p in s.split("_") if p]
    return bool(parts) and all(_ASCII_WORD.fullmatch(p) for p in parts)


def classify(token: bytes | str) -> TokenCategory:
    """Category of a token given as raw bytes (or already-decoded text)."""
    if isinstance(token, bytes):
        if token.startswith(b" "):
            token = token[1:]
        try:
            s = token.decode("utf-8")
        except UnicodeDecodeError:
            return TokenCategory.NonLatin
    else:
        s = token[1:] if token.startswith(" ") else token

    if _SPECIAL.fullmatch(s):
        return TokenCategory.SpecialToken
    if _NUMBER.fullmatch(s):
        return TokenCategory.DigitsAndNumbers
    if s and sum(map(_is_punct, s)) > 0.8 * len(s):
        return TokenCategory.Punctuation
    if _underscore_words(s) or (_CAMEL.fullmatch(s) and not s.isupper()):
        return TokenCategory.VariableOrFunctionName
    if s and all(_is_latin_letter(c) for c in s):
        if all(c.isupper() for c in s):
            return TokenCategory.AllCapsLatin
        return TokenCategory.OtherLatin
    if any(_is_non_latin(c) for c in s):
        return TokenCategory.NonLatin
    return TokenCategory.Other


@dataclass
class ClassReport:
    counts: dict[TokenCategory, int]
    total: int

    def percent(self, cat: TokenCategory) -> float:
        return 100.0 * self.counts[cat] / self.total if self.total else 0.0

    def rows(self) -> list[tuple[str, int, float]]:
        return [(cat.value, self.counts[cat], self.percent(cat)) for cat in TokenCategory]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("category", "count", "percent"))
        for name, n, pct in self.rows():
            w.writerow((name, n, f"{pct:.1f}"))
        return buf.getvalue()

    def to_json(self) -> str:
        data = {
            "total": self.total,
            "categories": [{"category": name, "count": n, "percent": round(pct, 4)} for name, n, pct in self.rows()],
        }
        return json.dumps(data, indent=2) + "\n"


def classify_report(tokens: Iterable[bytes | str]) -> ClassReport:
    counts = {cat: 0 for cat in TokenCategory}
    total = 0
    for t in tokens:
        counts[classify(t)] += 1
        total += 1
    return ClassReport(counts, total)

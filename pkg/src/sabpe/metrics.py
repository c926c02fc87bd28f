"""Intrinsic tokenizer measures.

Compression rate is corpus bytes per emitted token, coverage is the number
of distinct vocabulary ids emitted, and mean token length is averaged over
merged vocabulary types.  Corpus-level measures are computed on a
pre-tokenized view of the corpus (:class:`EvalCorpus`) so that each distinct
pre-token is encoded once per tokenizer.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import asdict, dataclass, field

from .corpus import Document, Pretokenizer
from .tokenizer import Tokenizer, escape_bytes


class MetricsError(ValueError):
    pass


@dataclass
class EvalCorpus:
    """Per-language pre-token counts and byte totals of an evaluation corpus."""

    pattern: str
    pieces: dict[str, Counter]
    n_bytes: dict[str, int]
    n_documents: int

    @classmethod
    def from_documents(cls, docs: Iterable[Document], pretokenizer: Pretokenizer) -> EvalCorpus:
        pieces: dict[str, Counter] = {}
        n_bytes: dict[str, int] = {}
        n = 0
        for doc in docs:
            n += 1
            bucket = pieces.setdefault(doc.lang, Counter())
            bucket.update(pretokenizer.count(doc.text))
            n_bytes[doc.lang] = n_bytes.get(doc.lang, 0) + len(doc.text)
        return cls(pretokenizer.pattern, pieces, n_bytes, n)

    @property
    def languages(self) -> list[str]:
        return sorted(self.pieces)

    def token_counts(self, tok: Tokenizer) -> dict[str, Counter]:
        """Per-language occurrence counts of token ids under ``tok``."""
        if tok.pretokenizer.pattern != self.pattern:
            raise MetricsError("evaluation corpus was pre-tokenized with a different pattern")
        out = {}
        encode = tok.encode_pretoken
        for lang, bucket in self.pieces.items():
            counts: Counter = Counter()
            for piece, c in bucket.items():
                for i in encode(piece):
                    counts[i] += c
            out[lang] = counts
        return out

    def compression(self, tok: Tokenizer) -> tuple[float, dict[str, float]]:
        """Overall and per-language compression rates (token ids need not be counted)."""
        if tok.pretokenizer.pattern != self.pattern:
            raise MetricsError("evaluation corpus was pre-tokenized with a different pattern")
        encode = tok.encode_pretoken
        per_lang = {}
        total_tokens = 0
        for lang, bucket in self.pieces.items():
            n_tok = sum(len(encode(piece)) * c for piece, c in bucket.items())
            total_tokens += n_tok
            per_lang[lang] = self.n_bytes[lang] / n_tok if n_tok else 0.0
        total_bytes = sum(self.n_bytes.values())
        return (total_bytes / total_tokens if total_tokens else 0.0), per_lang


def as_eval_corpus(corpus: Iterable[Document] | EvalCorpus, tok: Tokenizer) -> EvalCorpus:
    if isinstance(corpus, EvalCorpus):
        return corpus
    return EvalCorpus.from_documents(corpus, tok.pretokenizer)


@dataclass
class LanguageMetrics:
    compression_rate: float
    coverage: int
    bytes: int
    tokens: int


@dataclass
class MetricsReport:
    compression_rate: float
    coverage: int
    mean_token_length: float
    vocab_size: int
    total_bytes: int
    total_tokens: int
    gini: float
    three_digit_count: int
    per_language: dict[str, LanguageMetrics] = field(default_factory=dict)
    steps_executed: int | None = None
    steps_skipped: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    def flat_row(self) -> dict[str, object]:
        row: dict[str, object] = {
            "compression_rate": round(self.compression_rate, 6),
            "coverage": self.coverage,
            "mean_token_length": round(self.mean_token_length, 6),
            "gini": round(self.gini, 6),
            "three_digit_count": self.three_digit_count,
            "steps_executed": "" if self.steps_executed is None else self.steps_executed,
            "steps_skipped": "" if self.steps_skipped is None else self.steps_skipped,
        }
        for lang in sorted(self.per_language):
            m = self.per_language[lang]
            row[f"cr[{lang}]"] = round(m.compression_rate, 6)
            row[f"coverage[{lang}]"] = m.coverage
        return row


def mean_token_length(tok: Tokenizer, *, include_base: bool = False) -> float:
    """Mean byte length over vocabulary types; merged types only unless ``include_base``."""
    if include_base:
        special = set(tok.special)
        ids = [i for i in range(len(tok)) if i not in special]
    else:
        ids = tok.merged_ids()
    if not ids:
        return 0.0
    return sum(len(tok.vocab[i]) for i in ids) / len(ids)


def evaluate(
    tok: Tokenizer,
    corpus: Iterable[Document] | EvalCorpus,
    *,
    mtl_include_base: bool = False,
) -> MetricsReport:
    ec = as_eval_corpus(corpus, tok)
    if ec.n_documents == 0:
        raise MetricsError("empty corpus")
    counts = ec.token_counts(tok)
    per_language = {}
    used: set[int] = set()
    total_tokens = 0
    for lang in ec.languages:
        c = counts[lang]
        n_tok = sum(c.values())
        n_bytes = ec.n_bytes[lang]
        per_language[lang] = LanguageMetrics(n_bytes / n_tok if n_tok else 0.0, len(c), n_bytes, n_tok)
        used.update(c)
        total_tokens += n_tok
    total_bytes = sum(ec.n_bytes.values())
    crs = [m.compression_rate for m in per_language.values() if m.tokens]
    meta = tok.metadata
    return MetricsReport(
        compression_rate=total_bytes / total_tokens if total_tokens else 0.0,
        coverage=len(used),
        mean_token_length=mean_token_length(tok, include_base=mtl_include_base),
        vocab_size=len(tok),
        total_bytes=total_bytes,
        total_tokens=total_tokens,
        gini=gini(crs) if crs else 0.0,
        three_digit_count=count_three_digit(tok),
        per_language=per_language,
        steps_executed=meta.get("steps_executed"),
        steps_skipped=meta.get("steps_skipped"),
    )


def gini(values: Iterable[float]) -> float:
    """Gini index, sum_ij |x_i - x_j| / (2 n^2 mean), via the sorted-rank identity."""
    xs = sorted(float(v) for v in values)
    n = len(xs)
    if n == 0:
        raise MetricsError("gini of an empty sequence")
    if xs[0] <= 0 or not all(math.isfinite(x) for x in xs):
        raise MetricsError("gini requires finite positive values")
    num = math.fsum((2 * i - n + 1) * x for i, x in enumerate(xs))
    g = num / (n * math.fsum(xs))
    return min(max(g, 0.0), 1.0)


_THREE_DIGITS = re.compile(rb"[0-9]{3}")


def count_three_digit(tok: Tokenizer) -> int:
    """Vocabulary tokens that are exactly three ASCII digits (no sign, no space)."""
    return sum(1 for v in tok.vocab if _THREE_DIGITS.fullmatch(v))


# ---------------------------------------------------------------------------
# CamelCase / snake_case name parts
# ---------------------------------------------------------------------------

_SNAKE = re.compile(r"[A-Za-z0-9_]*_[A-Za-z0-9_]*")
_CAMEL = re.compile(r"[A-Za-z][A-Za-z0-9]*")
# an uppercase run is one part; its last capital starts the next part when a
# lowercase letter follows (getHTTPStatus -> get, HTTP, Status)
_CAMEL_PART = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+[0-9]*|[A-Z]+[0-9]*|[0-9]+")


def name_parts(token: bytes | str) -> tuple[str, int] | None:
    """``("snake", n)`` or ``("camel", n)`` for identifier-like tokens, else None.

    One leading space is stripped first.  snake_case needs an underscore and a
    letter; CamelCase needs both an upper- and a lowercase letter.
    """
    if isinstance(token, bytes):
        try:
            token = token.decode("ascii")
        except UnicodeDecodeError:
            return None
    if token.startswith(" "):
        token = token[1:]
    if _SNAKE.fullmatch(token) and any(c.isalpha() for c in token):
        return "snake", sum(1 for seg in token.split("_") if seg)
    if _CAMEL.fullmatch(token) and any(c.isupper() for c in token) and any(c.islower() for c in token):
        return "camel", len(_CAMEL_PART.findall(token))
    return None


@dataclass
class NamePartHistogram:
    camel: dict[int, int] = field(default_factory=dict)
    snake: dict[int, int] = field(default_factory=dict)

    def rows(self) -> list[tuple[str, int, int]]:
        out = []
        for kind, hist in (("camel", self.camel), ("snake", self.snake)):
            out.extend((kind, parts, hist[parts]) for parts in sorted(hist))
        return out


def name_part_histogram(tok: Tokenizer, *, merged_only: bool = True) -> NamePartHistogram:
    hist = NamePartHistogram()
    ids = tok.merged_ids() if merged_only else range(len(tok))
    for i in ids:
        hit = name_parts(tok.vocab[i])
        if hit is None:
            continue
        kind, n = hit
        bucket = hist.camel if kind == "camel" else hist.snake
        bucket[n] = bucket.get(n, 0) + 1
    return hist


# ---------------------------------------------------------------------------
# token frequencies and vocabulary diffs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TokenFrequency:
    id: int
    token: str
    count: int
    probability: float


def token_frequencies(tok: Tokenizer, corpus: Iterable[Document] | EvalCorpus) -> list[TokenFrequency]:
    ec = as_eval_corpus(corpus, tok)
    if ec.n_documents == 0:
        raise MetricsError("empty corpus")
    total: Counter = Counter()
    for c in ec.token_counts(tok).values():
        total.update(c)
    n = sum(total.values())
    return [
        TokenFrequency(i, escape_bytes(tok.vocab[i]), total.get(i, 0), total.get(i, 0) / n if n else 0.0)
        for i in range(len(tok))
    ]


def frequencies_csv(rows: Iterable[TokenFrequency]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("id", "token", "count", "probability"))
    for r in rows:
        w.writerow((r.id, r.token, r.count, repr(r.probability)))
    return buf.getvalue()


@dataclass
class VocabDiff:
    count: int
    only_a: list[bytes]
    only_b: list[bytes]

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "only_a": [escape_bytes(t) for t in self.only_a],
            "only_b": [escape_bytes(t) for t in self.only_b],
        }


def vocab_diff(a: Tokenizer | Iterable[bytes], b: Tokenizer | Iterable[bytes]) -> VocabDiff:
    va = set(a.vocab if isinstance(a, Tokenizer) else a)
    vb = set(b.vocab if isinstance(b, Tokenizer) else b)
    only_a = sorted(va - vb)
    only_b = sorted(vb - va)
    return VocabDiff(len(only_a) + len(only_b), only_a, only_b)


def report_rows_csv(rows: list[Mapping[str, object]]) -> str:
    """Union-of-keys CSV for a list of flat report rows (first-seen column order)."""
    cols: list[str] = []
    for row in rows:
        for k in row:
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n", restval="")
    w.writeheader()
    for row in rows:
        w.writerow(row)
    return buf.getvalue()

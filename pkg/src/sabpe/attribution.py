"""Pair statistics with repository and language attribution.

Every live adjacent pair carries its total frequency plus occurrence counts
per repository and per language.  Counts (not sets) are kept so that a
repository or language drops out exactly when its last occurrence is merged
away; the distinct counts are the sizes of those maps.
"""

from __future__ import annotations

import hashlib
import os
from collections.abc import Iterable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import islice

from .corpus import DEFAULT_PRETOKENIZER, Document, Pretokenizer

PairKey = tuple[int, int]


class MonotonicityError(AssertionError):
    """A pair's frequency, repository count or language count went up."""


class PairStats:
    __slots__ = ("freq", "repos", "langs")

    def __init__(self, freq: int = 0, repos: dict[int, int] | None = None, langs: dict[int, int] | None = None):
        self.freq = freq
        self.repos = {} if repos is None else repos
        self.langs = {} if langs is None else langs

    @property
    def n_repos(self) -> int:
        return len(self.repos)

    @property
    def n_langs(self) -> int:
        return len(self.langs)

    def snapshot(self) -> tuple[int, int, int]:
        return self.freq, len(self.repos), len(self.langs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PairStats):
            return NotImplemented
        return self.freq == other.freq and self.repos == other.repos and self.langs == other.langs

    def __repr__(self) -> str:
        return f"PairStats(freq={self.freq}, repos={self.repos}, langs={self.langs})"


@dataclass(slots=True)
class AttributedWord:
    symbols: list[int]
    count: int
    repo: int
    lang: int


def _add(stats: dict[PairKey, PairStats], pair: PairKey, n: int, repo: int, lang: int) -> None:
    st = stats.get(pair)
    if st is None:
        st = stats[pair] = PairStats()
    st.freq += n
    repos = st.repos
    c = repos.get(repo, 0) + n
    if c:
        repos[repo] = c
    else:
        del repos[repo]
    langs = st.langs
    c = langs.get(lang, 0) + n
    if c:
        langs[lang] = c
    else:
        del langs[lang]
    if not st.freq:
        del stats[pair]


def build_stats(words: Iterable[AttributedWord]) -> dict[PairKey, PairStats]:
    """Count every adjacent position of every word (runs like ``a a a`` count twice)."""
    stats: dict[PairKey, PairStats] = {}
    for w in words:
        s = w.symbols
        for pair in zip(s, s[1:]):
            _add(stats, pair, w.count, w.repo, w.lang)
    return stats


def merge_symbols(symbols: list[int], left: int, right: int, new_id: int) -> list[int] | None:
    """Replace ``left right`` by ``new_id`` scanning left to right; None if absent."""
    n = len(symbols)
    out: list[int] = []
    i = 0
    found = False
    while i < n:
        if i + 1 < n and symbols[i] == left and symbols[i + 1] == right:
            out.append(new_id)
            i += 2
            found = True
        else:
            out.append(symbols[i])
            i += 1
    return out if found else None


@dataclass
class MergeDelta:
    occurrences: int = 0
    words_changed: int = 0
    changed: set[PairKey] = field(default_factory=set)
    increased: set[PairKey] = field(default_factory=set)


class PairTable:
    """Working corpus for training: words, live pair stats and an occurrence index.

    The index maps a pair to the words that contained it at some point; entries
    go stale after merges and are filtered lazily.
    """

    def __init__(self, words: list[AttributedWord], *, debug: bool = False):
        self.words = words
        self.debug = debug
        self.stats: dict[PairKey, PairStats] = {}
        self._where: dict[PairKey, set[int]] = {}
        stats, where = self.stats, self._where
        for i, w in enumerate(words):
            s = w.symbols
            for pair in zip(s, s[1:]):
                _add(stats, pair, w.count, w.repo, w.lang)
                bucket = where.get(pair)
                if bucket is None:
                    where[pair] = {i}
                else:
                    bucket.add(i)

    def apply_merge(self, pair: PairKey, new_id: int) -> MergeDelta:
        stats = self.stats
        st = stats.get(pair)
        if st is None or st.freq <= 0:
            raise KeyError(f"pair {pair} is not a live candidate")
        left, right = pair
        where = self._where
        words = self.words
        delta = MergeDelta()
        before: dict[PairKey, tuple[int, int, int] | None] | None = {} if self.debug else None

        for i in where.pop(pair, ()):
            w = words[i]
            old = w.symbols
            new = merge_symbols(old, left, right, new_id)
            if new is None:
                continue
            w.symbols = new
            delta.words_changed += 1
            delta.occurrences += (len(old) - len(new)) * w.count
            local: dict[PairKey, int] = {}
            for p in zip(old, old[1:]):
                local[p] = local.get(p, 0) - 1
            for p in zip(new, new[1:]):
                local[p] = local.get(p, 0) + 1
            cnt, repo, lang = w.count, w.repo, w.lang
            for p, d in local.items():
                if not d:
                    continue
                if before is not None and p not in before:
                    prev = stats.get(p)
                    before[p] = None if prev is None else prev.snapshot()
                _add(stats, p, d * cnt, repo, lang)
                delta.changed.add(p)
                if d > 0:
                    delta.increased.add(p)
                    bucket = where.get(p)
                    if bucket is None:
                        where[p] = {i}
                    else:
                        bucket.add(i)

        if pair in stats:
            raise AssertionError(f"pair {pair} survived its own merge")
        delta.changed.discard(pair)
        if before is not None:
            _check_monotone(stats, before, new_id)
        return delta


def _check_monotone(stats: dict[PairKey, PairStats], before: dict, new_id: int) -> None:
    for p, prev in before.items():
        cur = stats.get(p)
        if prev is None:
            if new_id not in p:
                raise MonotonicityError(f"pair {p} appeared without involving the new token {new_id}")
            continue
        now = (0, 0, 0) if cur is None else cur.snapshot()
        if now[0] > prev[0] or now[1] > prev[1] or now[2] > prev[2]:
            raise MonotonicityError(f"pair {p} counts increased from {prev} to {now}")


# ---------------------------------------------------------------------------
# Corpus -> attributed word table
# ---------------------------------------------------------------------------


@dataclass
class WordTable:
    words: list[AttributedWord]
    repos: list[str]
    langs: list[str]
    fingerprint: str
    n_documents: int
    n_bytes: int


def _count_chunk(args: tuple[list[tuple[bytes, str, str]], str]) -> dict[tuple[bytes, str, str], int]:
    chunk, pattern = args
    pre = DEFAULT_PRETOKENIZER if pattern == DEFAULT_PRETOKENIZER.pattern else Pretokenizer(pattern)
    counts: dict[tuple[bytes, str, str], int] = {}
    get = counts.get
    for text, repo, lang in chunk:
        for piece, c in pre.count(text).items():
            key = (piece, repo, lang)
            counts[key] = get(key, 0) + c
    return counts


def thread_count(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get("SABPE_THREADS", "1") or 1)
    return max(1, threads)


def collect_words(
    docs: Iterable[Document],
    pretokenizer: Pretokenizer = DEFAULT_PRETOKENIZER,
    *,
    threads: int | None = None,
    chunk_docs: int = 512,
) -> WordTable:
    """Pre-tokenize documents and aggregate pre-tokens per (bytes, repo, lang).

    Repositories and languages are interned in sorted name order and words are
    sorted, so the table does not depend on chunking or worker count.
    """
    threads = thread_count(threads)
    digest = hashlib.sha256()
    n_docs = 0
    n_bytes = 0

    def chunks():
        nonlocal n_docs, n_bytes
        it = iter(docs)
        while True:
            block = list(islice(it, chunk_docs))
            if not block:
                return
            rows = []
            for d in block:
                for part in (d.repo.encode(), d.lang.encode(), d.text):
                    digest.update(len(part).to_bytes(8, "little"))
                    digest.update(part)
                rows.append((d.text, d.repo, d.lang))
                n_bytes += len(d.text)
            n_docs += len(block)
            yield rows, pretokenizer.pattern

    totals: dict[tuple[bytes, str, str], int] = {}
    if threads == 1:
        results = map(_count_chunk, chunks())
        for part in results:
            _merge_counts(totals, part)
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for part in pool.map(_count_chunk, chunks()):
                _merge_counts(totals, part)

    repos = sorted({k[1] for k in totals})
    langs = sorted({k[2] for k in totals})
    repo_id = {r: i for i, r in enumerate(repos)}
    lang_id = {lang: i for i, lang in enumerate(langs)}
    words = [
        AttributedWord(list(piece), totals[(piece, repo, lang)], repo_id[repo], lang_id[lang])
        for (piece, repo, lang) in sorted(totals, key=lambda k: (repo_id[k[1]], lang_id[k[2]], k[0]))
    ]
    return WordTable(words, repos, langs, digest.hexdigest(), n_docs, n_bytes)


def _merge_counts(into: dict, part: dict) -> None:
    get = into.get
    for key, c in part.items():
        into[key] = get(key, 0) + c

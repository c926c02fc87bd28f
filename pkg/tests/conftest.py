from __future__ import annotations

import os
import random
from collections import Counter

import pytest

import sabpe.attribution as _attribution
from sabpe.corpus import DEFAULT_PRETOKENIZER, Document

# every training run in the suite executes with the monotonicity monitor on
os.environ["SABPE_DEBUG"] = "1"
os.environ.setdefault("SABPE_THREADS", "1")


def random_docs(
    rng: random.Random,
    *,
    n_docs: int = 12,
    n_repos: int = 4,
    n_langs: int = 3,
    alphabet: str = "abcde",
    words_per_doc: tuple[int, int] = (5, 40),
    word_len: tuple[int, int] = (1, 8),
) -> list[Document]:
    langs = ["Python", "Go", "Rust", "Java", "Ruby", "Lua"][:n_langs]
    docs = []
    for i in range(n_docs):
        words = [
            "".join(rng.choice(alphabet) for _ in range(rng.randint(*word_len)))
            for _ in range(rng.randint(*words_per_doc))
        ]
        sep = rng.choice([" ", " ", "\n", ". "])
        repo = f"repo{i % n_repos}" if i < n_repos else f"repo{rng.randrange(n_repos)}"
        lang = langs[i % n_langs] if i < n_langs else rng.choice(langs)
        docs.append(Document(sep.join(words).encode(), repo, lang))
    return docs


def oracle_rows(docs: list[Document]) -> list[tuple[bytes, int, str, str]]:
    counts: Counter = Counter()
    for d in docs:
        for piece in DEFAULT_PRETOKENIZER.split(d.text):
            counts[(piece, d.repo, d.lang)] += 1
    return [(p, c, r, lang) for (p, r, lang), c in sorted(counts.items())]


def merges_as_bytes(tok) -> list[tuple[bytes, bytes]]:
    return [(tok.vocab[m.left], tok.vocab[m.right]) for m in tok.merges]


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240611)


@pytest.fixture
def toy_docs() -> list[Document]:
    return [
        Document(b"hello world hello", "alpha", "Python"),
        Document(b"world wide web", "beta", "Go"),
        Document(b"hello_world = 1", "gamma", "Python"),
    ]


# -- acceptance reporting ------------------------------------------------------

MONITOR = {"merges": 0}
_real_check = _attribution._check_monotone


def _counting_check(stats, before, new_id):
    MONITOR["merges"] += 1
    _real_check(stats, before, new_id)


_attribution._check_monotone = _counting_check

ACCEPTANCE: dict[int, tuple[bool, str]] = {}
ACCEPTANCE_COUNT = 11


@pytest.fixture
def accept():
    def record(number: int, ok: bool, detail: str) -> None:
        ACCEPTANCE[number] = (bool(ok), detail)
        assert ok, f"criterion {number}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in range(1, ACCEPTANCE_COUNT + 1):
        if n in ACCEPTANCE:
            ok, detail = ACCEPTANCE[n]
            tr.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {detail}")
        else:
            tr.write_line(f"[----] {n:2d}. not run or errored before reporting")
    tr.write_line(f"monotonicity monitor checked {MONITOR['merges']} merges in this session")

"""BPE training with attribution-aware priority and merge-skip criteria.

The loop pops the best candidate from a lazy max-heap.  Because a pair's
frequency, repository count and language count can only go down as training
proceeds, a heap entry's key is an upper bound on the pair's current key:
on pop the key is recomputed and the entry is re-pushed if it went stale.
A pair that fails the skip thresholds can never pass them later, so it is
discarded for good.
"""

from __future__ import annotations

import csv
import enum
import heapq
import io
import logging
import math
import os
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field

from .attribution import AttributedWord, PairKey, PairStats, PairTable, WordTable, collect_words
from .corpus import DEFAULT_PRETOKENIZER, Document, Pretokenizer
from .tokenizer import Tokenizer, escape_bytes

logger = logging.getLogger(__name__)

DEFAULT_RESERVED = (
    "<|endoftext|>",
    "<|unused_token_1|>",
    "<|unused_token_2|>",
    "<|unused_token_3|>",
)


class TrainingError(ValueError):
    pass


class PriorityCriterion(str, enum.Enum):
    F = "F"
    F_L = "F_L"
    F_LOG_R1 = "F_LOG_R1"
    F_LOG_R = "F_LOG_R"
    F_LOG_R1_L = "F_LOG_R1_L"
    F_LOG_R_L = "F_LOG_R_L"

    @classmethod
    def parse(cls, name: str | PriorityCriterion) -> PriorityCriterion:
        if isinstance(name, cls):
            return name
        key = str(name).strip().upper().replace("-", "_")
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(c.value.lower() for c in cls)
            raise TrainingError(f"unknown criterion {name!r} (choose from {choices})") from None

    @property
    def nullifies_single_repo(self) -> bool:
        return self in (PriorityCriterion.F_LOG_R, PriorityCriterion.F_LOG_R_L)


def score(criterion: PriorityCriterion | str, f: int, r: int, l: int) -> float:
    """Priority of a pair with frequency ``f`` seen in ``r`` repositories and ``l`` languages."""
    c = PriorityCriterion.parse(criterion)
    if c is PriorityCriterion.F:
        return f
    if c is PriorityCriterion.F_L:
        return f * l
    if c is PriorityCriterion.F_LOG_R1:
        return f * math.log(r + 1)
    if c is PriorityCriterion.F_LOG_R:
        return f * math.log(r) if r > 0 else 0.0
    if c is PriorityCriterion.F_LOG_R1_L:
        return f * math.log(r + 1) * l
    return f * math.log(r) * l if r > 0 else 0.0


def _scorer(c: PriorityCriterion) -> Callable[[int, int, int], float]:
    log = math.log
    return {
        PriorityCriterion.F: lambda f, r, l: f,
        PriorityCriterion.F_L: lambda f, r, l: f * l,
        PriorityCriterion.F_LOG_R1: lambda f, r, l: f * log(r + 1),
        PriorityCriterion.F_LOG_R: lambda f, r, l: f * log(r),
        PriorityCriterion.F_LOG_R1_L: lambda f, r, l: f * log(r + 1) * l,
        PriorityCriterion.F_LOG_R_L: lambda f, r, l: f * log(r) * l,
    }[c]


@dataclass(frozen=True)
class SkipCriterion:
    min_repos: int = 1
    min_langs: int = 1

    def __post_init__(self) -> None:
        if self.min_repos < 1 or self.min_langs < 1:
            raise TrainingError("skip thresholds must be >= 1")

    def passes(self, n_repos: int, n_langs: int) -> bool:
        return n_repos >= self.min_repos and n_langs >= self.min_langs

    @property
    def active(self) -> bool:
        return self.min_repos > 1 or self.min_langs > 1


@dataclass
class TrainConfig:
    vocab_size: int
    priority: PriorityCriterion = PriorityCriterion.F
    skip: SkipCriterion = field(default_factory=SkipCriterion)
    reserved_tokens: Sequence[str] = DEFAULT_RESERVED
    pretokenizer: Pretokenizer = DEFAULT_PRETOKENIZER
    threads: int | None = None
    debug: bool | None = None
    progress_every: int = 1000

    def __post_init__(self) -> None:
        self.priority = PriorityCriterion.parse(self.priority)
        reserved = [t.encode("utf-8") if isinstance(t, str) else bytes(t) for t in self.reserved_tokens]
        if len(set(reserved)) != len(reserved) or any(len(t) < 2 for t in reserved):
            raise TrainingError("reserved tokens must be distinct and at least two bytes long")
        if self.vocab_size <= 256 + len(reserved):
            raise TrainingError(
                f"vocab_size {self.vocab_size} must exceed the alphabet size {256 + len(reserved)}"
            )

    @property
    def reserved_bytes(self) -> list[bytes]:
        return [t.encode("utf-8") if isinstance(t, str) else bytes(t) for t in self.reserved_tokens]


@dataclass(frozen=True, slots=True)
class MergeRecord:
    step: int
    left: int
    right: int
    new: int | None
    freq: int
    repos: int
    langs: int
    action: str  # "executed" | "skipped"


@dataclass
class TrainResult:
    tokenizer: Tokenizer
    history: list[MergeRecord]
    status: str  # "complete" | "exhausted"
    repos: list[str]
    langs: list[str]

    @property
    def executed_steps(self) -> int:
        return sum(1 for r in self.history if r.action == "executed")

    @property
    def skipped_steps(self) -> int:
        return sum(1 for r in self.history if r.action == "skipped")

    def __iter__(self):
        # allows ``tok, history = train(...)``
        return iter((self.tokenizer, self.history))


def debug_enabled(flag: bool | None = None) -> bool:
    if flag is not None:
        return flag
    return os.environ.get("SABPE_DEBUG", "") not in ("", "0", "false", "no")


Observer = Callable[[MergeRecord, PairTable], None]


def train(
    corpus: Iterable[Document] | WordTable,
    cfg: TrainConfig,
    *,
    observer: Observer | None = None,
) -> TrainResult:
    if isinstance(corpus, WordTable):
        table = corpus
    else:
        table = collect_words(corpus, cfg.pretokenizer, threads=cfg.threads)
    if table.n_documents == 0:
        raise TrainingError("empty corpus")
    debug = debug_enabled(cfg.debug)

    reserved = cfg.reserved_bytes
    vocab: list[bytes] = [bytes([i]) for i in range(256)] + reserved
    special_ids = list(range(256, 256 + len(reserved)))
    ids = {v: i for i, v in enumerate(vocab)}
    merges: list[tuple[int, int, int]] = []
    history: list[MergeRecord] = []

    # training rewrites symbols in place; keep the caller's table intact
    words = [AttributedWord(list(w.symbols), w.count, w.repo, w.lang) for w in table.words]
    pairs = PairTable(words, debug=debug)
    stats = pairs.stats
    crit = cfg.priority
    skip = cfg.skip
    prio = _scorer(crit)
    nullify = crit.nullifies_single_repo

    def key(pair: PairKey, st: PairStats) -> tuple:
        f, r, l = st.freq, len(st.repos), len(st.langs)
        return (-prio(f, r, l), -f, vocab[pair[0]], vocab[pair[1]], pair)

    heap = [key(p, st) for p, st in stats.items()]
    heapq.heapify(heap)
    discarded: set[PairKey] = set()
    status = "complete"
    step = 0
    executed = 0

    while len(vocab) < cfg.vocab_size:
        if not heap:
            status = "exhausted"
            break
        entry = heapq.heappop(heap)
        pair = entry[4]
        st = stats.get(pair)
        if st is None or pair in discarded:
            continue
        fresh = key(pair, st)
        if fresh != entry:
            heapq.heappush(heap, fresh)
            continue
        f, r, l = st.freq, len(st.repos), len(st.langs)
        if fresh[0] == 0:
            # only zero-priority candidates remain
            status = "exhausted"
            break
        if not skip.passes(r, l):
            discarded.add(pair)
            rec = MergeRecord(step, pair[0], pair[1], None, f, r, l, "skipped")
            history.append(rec)
            step += 1
            if observer is not None:
                observer(rec, pairs)
            continue

        if nullify and r < 2:
            raise AssertionError(f"single-repository merge {pair} executed under {crit.value}")
        merged = vocab[pair[0]] + vocab[pair[1]]
        new_id = ids.get(merged)
        if new_id is None:
            new_id = len(vocab)
            vocab.append(merged)
            ids[merged] = new_id
        merges.append((pair[0], pair[1], new_id))
        rec = MergeRecord(step, pair[0], pair[1], new_id, f, r, l, "executed")
        history.append(rec)
        step += 1
        executed += 1
        delta = pairs.apply_merge(pair, new_id)
        for p in delta.increased:
            s2 = stats.get(p)
            if s2 is not None and p not in discarded:
                heapq.heappush(heap, key(p, s2))
        if debug and discarded:
            for p in delta.changed & discarded:
                s2 = stats.get(p)
                if s2 is not None and skip.passes(len(s2.repos), len(s2.langs)):
                    raise AssertionError(f"discarded pair {p} became eligible again")
        if observer is not None:
            observer(rec, pairs)
        if cfg.progress_every and executed % cfg.progress_every == 0:
            logger.info("executed %d merges (vocab %d/%d, %d skipped)", executed, len(vocab), cfg.vocab_size, step - executed)

    if status == "exhausted":
        logger.warning(
            "candidate queue exhausted at vocabulary size %d (target %d)", len(vocab), cfg.vocab_size
        )
    tok = Tokenizer(
        vocab,
        merges,
        special=special_ids,
        pretokenizer=cfg.pretokenizer,
        metadata={
            "criterion": crit.value,
            "min_repos": skip.min_repos,
            "min_langs": skip.min_langs,
            "log_base": "e",
            "vocab_size": cfg.vocab_size,
            "reserved_tokens": [escape_bytes(t) for t in reserved],
            "corpus_fingerprint": table.fingerprint,
            "corpus_documents": table.n_documents,
            "corpus_bytes": table.n_bytes,
            "steps_executed": executed,
            "steps_skipped": step - executed,
            "status": status,
        },
    )
    return TrainResult(tok, history, status, table.repos, table.langs)


HISTORY_HEADER = ("step", "action", "left", "right", "freq", "repos", "langs")


def export_history(records: Iterable[MergeRecord], vocab: Sequence[bytes], out: io.TextIOBase | None = None) -> str:
    """Write the merge history as CSV; returns the text when ``out`` is None."""
    sink = io.StringIO() if out is None else out
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(HISTORY_HEADER)
    for r in records:
        w.writerow((r.step, r.action, escape_bytes(vocab[r.left]), escape_bytes(vocab[r.right]), r.freq, r.repos, r.langs))
    return sink.getvalue() if out is None else ""


def read_history(text: str) -> list[dict[str, str]]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return rows

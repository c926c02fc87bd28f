"""Vocabulary pruning: reverse merge order, or leaf-first by an external score.

Score files are CSV ``token_id,score``; lower scores are pruned first.
"""

from __future__ import annotations

import csv
import heapq
import io
import math
import os
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

from .corpus import Document
from .metrics import EvalCorpus, as_eval_corpus
from .tokenizer import Tokenizer, escape_bytes


class PruneError(ValueError):
    pass


def prune_reverse(tok: Tokenizer, k: int) -> Tokenizer:
    """Drop the last ``k`` merges and the tokens only they produce."""
    n = len(tok.merges)
    if k < 0 or k > n:
        raise PruneError(f"cannot prune {k} merges from a tokenizer with {n}")
    if k == 0:
        return tok
    return tok.without_rules(range(n - k, n))


@dataclass(frozen=True)
class Removal:
    token_id: int
    token: bytes
    score: float


def read_scores(path: str | os.PathLike) -> dict[int, float]:
    scores: dict[int, float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        rows = csv.reader(fh)
        for lineno, row in enumerate(rows, start=1):
            if not row or (lineno == 1 and row[0].strip() == "token_id"):
                continue
            if len(row) < 2:
                raise PruneError(f"{path}:{lineno}: expected token_id,score")
            try:
                tid, value = int(row[0]), float(row[1])
            except ValueError:
                raise PruneError(f"{path}:{lineno}: bad number in {row!r}") from None
            if not math.isfinite(value):
                raise PruneError(f"{path}:{lineno}: score must be finite")
            scores[tid] = value
    return scores


def leaf_removal_order(tok: Tokenizer, scores: Mapping[int, float], k: int | None = None) -> list[Removal]:
    """Removal sequence of leaf-based pruning (at most ``k`` steps, all if None).

    A leaf is a merged token that no retained merge uses as a constituent.
    The lowest-scored leaf goes first; ties go to the later-created token.
    """
    prunable = tok.merged_ids()
    missing = [i for i in prunable if i not in scores]
    if missing:
        raise PruneError(f"scores missing for {len(missing)} prunable tokens (first: {missing[0]})")
    for i in prunable:
        if not math.isfinite(scores[i]):
            raise PruneError(f"score for token {i} is not finite")

    usage = {i: 0 for i in prunable}
    rules_of: dict[int, list[int]] = {}
    for rule in tok.merges:
        rules_of.setdefault(rule.result, []).append(rule.rank)
        for part in (rule.left, rule.right):
            if part in usage:
                usage[part] += 1
    heap = [(scores[i], -tok.creation_rank(i), i) for i in prunable if usage[i] == 0]
    heapq.heapify(heap)
    removed: list[Removal] = []
    limit = len(prunable) if k is None else k
    while heap and len(removed) < limit:
        score, _, tid = heapq.heappop(heap)
        removed.append(Removal(tid, tok.vocab[tid], score))
        for rank in rules_of.get(tid, ()):
            rule = tok.merges[rank]
            for part in (rule.left, rule.right):
                if part in usage:
                    usage[part] -= 1
                    if usage[part] == 0:
                        heapq.heappush(heap, (scores[part], -tok.creation_rank(part), part))
    return removed


def apply_removals(tok: Tokenizer, removals: Iterable[Removal]) -> Tokenizer:
    gone = {r.token_id for r in removals}
    if not gone:
        return tok
    return tok.without_rules(rule.rank for rule in tok.merges if rule.result in gone)


def prune_by_score(tok: Tokenizer, scores: Mapping[int, float], k: int) -> tuple[Tokenizer, list[Removal]]:
    if k < 0:
        raise PruneError("k must be non-negative")
    order = leaf_removal_order(tok, scores, k)
    if len(order) < k:
        raise PruneError(f"only {len(order)} prunable leaves were available, {k} requested")
    return apply_removals(tok, order), order


def removal_log_csv(removals: Sequence[Removal]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("order", "token_id", "token", "score"))
    for n, r in enumerate(removals):
        w.writerow((n, r.token_id, escape_bytes(r.token), repr(r.score)))
    return buf.getvalue()


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PruneOrder:
    kind: str  # "reverse" | "score"
    scores: Mapping[int, float] | None = None

    @classmethod
    def reverse(cls) -> PruneOrder:
        return cls("reverse")

    @classmethod
    def by_score(cls, scores: Mapping[int, float]) -> PruneOrder:
        return cls("score", dict(scores))


@dataclass
class PruneCurvePoint:
    removed: int
    compression_rate: float
    per_language: dict[str, float] = field(default_factory=dict)


def prune_curve(
    tok: Tokenizer,
    corpus: Iterable[Document] | EvalCorpus,
    order: PruneOrder,
    checkpoints: Sequence[int],
    *,
    validate: bool = True,
) -> list[PruneCurvePoint]:
    cps = list(checkpoints)
    if any(b <= a for a, b in zip(cps, cps[1:])):
        raise PruneError("checkpoints must be strictly ascending")
    if cps and cps[0] < 0:
        raise PruneError("checkpoints must be non-negative")
    ec = as_eval_corpus(corpus, tok)
    if order.kind == "score":
        if order.scores is None:
            raise PruneError("score order needs a score table")
        sequence = leaf_removal_order(tok, order.scores, cps[-1] if cps else 0)
        if cps and len(sequence) < cps[-1]:
            raise PruneError(f"only {len(sequence)} prunable leaves were available, {cps[-1]} requested")
    elif order.kind != "reverse":
        raise PruneError(f"unknown prune order {order.kind!r}")

    points = []
    for c in cps:
        pruned = prune_reverse(tok, c) if order.kind == "reverse" else apply_removals(tok, sequence[:c])
        if validate:
            pruned.validate()
        cr, per_lang = ec.compression(pruned)
        points.append(PruneCurvePoint(c, cr, per_lang))
    return points


def curve_csv(points: Sequence[PruneCurvePoint]) -> str:
    langs = sorted({lang for p in points for lang in p.per_language})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["removed", "compression_rate", *langs])
    for p in points:
        w.writerow([p.removed, f"{p.compression_rate:.6f}", *(f"{p.per_language.get(lang, 0.0):.6f}" for lang in langs)])
    return buf.getvalue()

import pytest

from sabpe.corpus import Document
from sabpe.metrics import EvalCorpus, evaluate
from sabpe.pruner import (
    PruneError,
    PruneOrder,
    apply_removals,
    curve_csv,
    leaf_removal_order,
    prune_by_score,
    prune_curve,
    prune_reverse,
    read_scores,
    removal_log_csv,
)
from sabpe.tokenizer import Tokenizer
from sabpe.trainer import TrainConfig, train

from conftest import random_docs

BASE = [bytes([b]) for b in range(256)]
a, b, c, h, i = (ord(x) for x in "abchi")


def three_merges() -> Tokenizer:
    # hi, ab, hia
    vocab = BASE + [b"hi", b"ab", b"hia"]
    return Tokenizer(vocab, [(h, i, 256), (a, b, 257), (256, a, 258)])


def chain() -> Tokenizer:
    # a+b -> X, X+c -> Y
    return Tokenizer(BASE + [b"ab", b"abc"], [(a, b, 256), (256, c, 257)])


@pytest.fixture
def trained(rng):
    docs = random_docs(rng, n_docs=20, alphabet="abcdef", words_per_doc=(20, 60))
    return train(docs, TrainConfig(vocab_size=330)).tokenizer, docs


def test_reverse_k0_identity():
    tok = three_merges()
    assert prune_reverse(tok, 0) is tok


def test_reverse_k1_falls_back_to_children():
    tok = three_merges()
    pruned = prune_reverse(tok, 1)
    assert len(pruned.merges) == 2
    assert pruned.encode(b"hia") == [256, a]
    assert tok.encode(b"hia") == [258]


def test_reverse_full_is_bytes_only(trained):
    tok, docs = trained
    pruned = prune_reverse(tok, len(tok.merges))
    assert len(pruned) == 256 + len(tok.special)
    assert evaluate(pruned, docs).compression_rate == 1.0


def test_reverse_bounds():
    with pytest.raises(PruneError):
        prune_reverse(three_merges(), 4)


def test_chain_removes_child_first():
    order = leaf_removal_order(chain(), {256: 0.2, 257: 0.1})
    assert [r.token_id for r in order] == [257, 256]
    # even when the parent has the lower score it must wait for its child
    order = leaf_removal_order(chain(), {256: 0.0, 257: 0.9})
    assert [r.token_id for r in order] == [257, 256]


def test_prune_by_score_k0_and_errors():
    tok = chain()
    same, log = prune_by_score(tok, {256: 1, 257: 2}, 0)
    assert same is tok and log == []
    with pytest.raises(PruneError, match="only 2 prunable leaves"):
        prune_by_score(tok, {256: 1, 257: 2}, 3)
    with pytest.raises(PruneError, match="missing"):
        prune_by_score(tok, {257: 2}, 1)


def test_score_ties_prefer_later_tokens():
    tok = three_merges()
    order = leaf_removal_order(tok, {256: 1.0, 257: 1.0, 258: 1.0})
    assert [r.token_id for r in order] == [258, 257, 256]


def test_leaf_safety_on_trained(trained):
    tok, _ = trained
    scores = {t: float((t * 7919) % 101) for t in tok.merged_ids()}
    order = leaf_removal_order(tok, scores)
    removed = set()
    for r in order:
        removed.add(r.token_id)
        retained = [m for m in tok.merges if m.result not in removed]
        assert all(r.token_id not in (m.left, m.right) for m in retained)
    pruned, _ = prune_by_score(tok, scores, len(order) // 2)
    pruned.validate()
    assert len(order) == len(tok.merged_ids())


def test_curve_monotone_and_endpoints(trained):
    tok, docs = trained
    ec = EvalCorpus.from_documents(docs, tok.pretokenizer)
    n = len(tok.merges)
    checkpoints = [0, 5, 20, 40, n]
    points = prune_curve(tok, ec, PruneOrder.reverse(), checkpoints)
    crs = [p.compression_rate for p in points]
    assert crs[0] == ec.compression(tok)[0]
    assert crs[-1] == 1.0
    assert all(x >= y for x, y in zip(crs, crs[1:]))
    text = curve_csv(points)
    assert text.splitlines()[0].startswith("removed,compression_rate,")


def test_score_curve(trained):
    tok, docs = trained
    scores = {t: float(t) for t in tok.merged_ids()}
    points = prune_curve(tok, docs, PruneOrder.by_score(scores), [0, 10, len(scores)])
    assert points[-1].compression_rate == 1.0


def test_curve_checkpoint_order():
    with pytest.raises(PruneError, match="ascending"):
        prune_curve(chain(), [Document(b"abc", "r", "Go")], PruneOrder.reverse(), [2, 1])


def test_read_scores(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("token_id,score\n256,0.5\n257,-1\n")
    assert read_scores(p) == {256: 0.5, 257: -1.0}
    p.write_text("256,abc\n")
    with pytest.raises(PruneError, match=":1"):
        read_scores(p)


def test_apply_removals_and_log():
    tok = chain()
    order = leaf_removal_order(tok, {256: 1, 257: 0}, 1)
    pruned = apply_removals(tok, order)
    assert pruned.vocab[-1] == b"ab"
    assert removal_log_csv(order).splitlines() == ["order,token_id,token,score", "0,257,abc,0"]

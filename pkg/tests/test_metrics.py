import csv
import io
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sabpe.corpus import DEFAULT_PRETOKENIZER, Document
from sabpe.metrics import (
    EvalCorpus,
    MetricsError,
    count_three_digit,
    evaluate,
    frequencies_csv,
    gini,
    mean_token_length,
    name_part_histogram,
    name_parts,
    report_rows_csv,
    token_frequencies,
    vocab_diff,
)
from sabpe.tokenizer import Tokenizer

from oracles import gini_pairwise

BASE = [bytes([b]) for b in range(256)]


def tok_with(*tokens: bytes) -> Tokenizer:
    """Tokenizer whose merged tokens are built left to right, byte by byte."""
    vocab = list(BASE)
    ids = {v: i for i, v in enumerate(vocab)}
    merges = []
    for t in tokens:
        cur = t[:1]
        for b in t[1:]:
            nxt = cur + bytes([b])
            if nxt not in ids:
                ids[nxt] = len(vocab)
                vocab.append(nxt)
                merges.append((ids[cur], b, ids[nxt]))
            cur = nxt
    return Tokenizer(vocab, merges)


HI = tok_with(b"hi")


def docs(*texts, lang="Python"):
    return [Document(t, "r", lang) for t in texts]


def test_hihi_compression():
    report = evaluate(HI, docs(b"hihi"))
    assert report.compression_rate == 2.0
    assert report.coverage == 1
    assert report.per_language["Python"].tokens == 2


def test_byte_only_compression_and_coverage():
    report = evaluate(Tokenizer.bytes_only(), docs(b"hello", b"help"))
    assert report.compression_rate == 1.0
    assert report.coverage == len(set(b"hellohelp"))


def test_evaluate_empty_corpus():
    with pytest.raises(MetricsError, match="empty corpus"):
        evaluate(HI, [])


def test_per_language_and_gini():
    report = evaluate(HI, docs(b"hihi") + docs(b"hh", lang="Go"))
    assert report.per_language["Go"].compression_rate == 1.0
    assert report.gini == pytest.approx(gini([1.0, 2.0]))
    assert report.compression_rate == 6 / 4


def test_eval_corpus_pattern_mismatch():
    ec = EvalCorpus.from_documents(docs(b"hi"), DEFAULT_PRETOKENIZER)
    other = Tokenizer(HI.vocab, [(m.left, m.right, m.result) for m in HI.merges], pretokenizer=type(DEFAULT_PRETOKENIZER)(r"\w+"))
    with pytest.raises(MetricsError):
        ec.compression(other)


def test_gini_examples():
    assert gini([3, 3, 3]) == 0
    assert gini([1, 3]) == 0.25
    assert gini([1, 1, 1, 9]) == pytest.approx(gini_pairwise([1, 1, 1, 9]), abs=1e-12)
    with pytest.raises(MetricsError):
        gini([])
    with pytest.raises(MetricsError):
        gini([1, 0])


@settings(max_examples=200)
@given(st.lists(st.floats(0.01, 100), min_size=1, max_size=30), st.floats(0.1, 50))
def test_gini_properties(xs, scale):
    g = gini(xs)
    assert 0 <= g < 1
    assert g == pytest.approx(gini_pairwise(xs), abs=1e-12)
    assert gini([x * scale for x in xs]) == pytest.approx(g, abs=1e-12)


def test_three_digit_count():
    assert count_three_digit(tok_with(b"123", b" 123", b"1234", b"12")) == 1
    assert count_three_digit(Tokenizer.bytes_only()) == 0


@pytest.mark.parametrize(
    "token, expected",
    [
        ("getHTTPStatus", ("camel", 3)),
        ("snake_case", ("snake", 2)),
        ("parseURL", ("camel", 2)),
        ("URLParser", ("camel", 2)),
        ("a_b_c", ("snake", 3)),
        (" fooBar", ("camel", 2)),
        ("_private", ("snake", 1)),
        ("getX2", ("camel", 2)),
        ("hello", None),
        ("HTTP", None),
        ("__", None),
        ("x.y", None),
        (b"\xff", None),
    ],
)
def test_name_parts(token, expected):
    assert name_parts(token) == expected


def test_name_part_histogram_counts_merged_tokens():
    hist = name_part_histogram(tok_with(b"getHTTPStatus", b"a_b"))
    # getH .. getHTTPS have two parts, getHTTPSt .. getHTTPStatus three
    assert hist.camel == {2: 5, 3: 5}
    assert hist.snake == {1: 1, 2: 1}  # "a_", "a_b"


def test_mean_token_length():
    tok = tok_with(b"abc")
    assert mean_token_length(tok) == 2.5
    assert mean_token_length(tok, include_base=True) == (256 + 5) / 258
    assert mean_token_length(Tokenizer.bytes_only()) == 0.0


def test_frequencies():
    rows = token_frequencies(HI, docs(b"hihi"))
    hi = rows[256]
    assert (hi.count, hi.probability) == (2, 1.0)
    assert rows[ord("z")].count == 0 and rows[ord("z")].probability == 0
    parsed = list(csv.DictReader(io.StringIO(frequencies_csv(rows))))
    assert parsed[256] == {"id": "256", "token": "hi", "count": "2", "probability": "1.0"}


def test_vocab_diff():
    assert vocab_diff(HI, HI).count == 0
    assert vocab_diff([b"x", b"y"], [b"y", b"z"]).count == 2
    d = vocab_diff(HI, tok_with(b"ho"))
    assert d.only_a == [b"hi"] and d.only_b == [b"ho"]


def test_report_rows_union_columns():
    text = report_rows_csv([{"a": 1}, {"a": 2, "b": 3}])
    assert text.splitlines() == ["a,b", "1,", "2,3"]


def test_flat_row_has_per_language_columns():
    row = evaluate(HI, docs(b"hihi") + docs(b"hh", lang="Go")).flat_row()
    assert row["cr[Python]"] == 2.0 and row["coverage[Go]"] == 1


def test_random_gini_matches_pairwise():
    r = random.Random(1)
    for _ in range(50):
        xs = [r.uniform(0.5, 8) for _ in range(r.randint(1, 40))]
        assert abs(gini(xs) - gini_pairwise(xs)) < 1e-12

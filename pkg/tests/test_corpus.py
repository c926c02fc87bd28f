import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sabpe.corpus import (
    CorpusError,
    DEFAULT_PRETOKENIZER,
    Document,
    ExtensionMap,
    LANGUAGE_EXTENSIONS,
    Pretokenizer,
    ingest_jsonl,
    ingest_tree,
    load_corpus,
    pretokenize,
)

GPT2_PATTERN = r"""'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+"""


def write_jsonl(path, rows):
    path.write_text("".join((r if isinstance(r, str) else json.dumps(r)) + "\n" for r in rows))
    return path


def test_jsonl_line_maps_fields(tmp_path):
    p = write_jsonl(tmp_path / "c.jsonl", [{"text": "x=1\n", "repo": "r1", "lang": "Python"}])
    assert list(ingest_jsonl(p)) == [Document(b"x=1\n", "r1", "Python")]


def test_jsonl_empty_file(tmp_path):
    p = tmp_path / "empty.jsonl"
    p.write_text("")
    assert list(ingest_jsonl(p)) == []


def test_jsonl_missing_field_names_line(tmp_path):
    p = write_jsonl(tmp_path / "c.jsonl", [{"text": "a", "repo": "r", "lang": "Go"}, {"text": "b", "lang": "Go"}])
    with pytest.raises(CorpusError, match="missing field repo at line 2"):
        list(ingest_jsonl(p))


def test_jsonl_malformed_line(tmp_path):
    p = write_jsonl(tmp_path / "c.jsonl", [{"text": "a", "repo": "r", "lang": "Go"}, "{not json"])
    with pytest.raises(CorpusError, match="line 2"):
        list(ingest_jsonl(p))


def test_jsonl_non_string_field(tmp_path):
    p = write_jsonl(tmp_path / "c.jsonl", [{"text": 3, "repo": "r", "lang": "Go"}])
    with pytest.raises(CorpusError, match="text"):
        list(ingest_jsonl(p))


def test_jsonl_skips_blank_lines(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text('{"text":"a","repo":"r","lang":"Go"}\n\n{"text":"b","repo":"r","lang":"Go"}\n')
    assert [d.text for d in ingest_jsonl(p)] == [b"a", b"b"]


def make_tree(root):
    (root / "projA").mkdir(parents=True)
    (root / "projA" / "main.py").write_bytes(b"print(1)\n")
    (root / "projB").mkdir()
    (root / "projB" / "notes.txt").write_bytes(b"hello")
    (root / "projC" / "src").mkdir(parents=True)
    (root / "projC" / "src" / "lib.rs").write_bytes(b"fn main() {}\n")
    (root / "README.py").write_bytes(b"# top level\n")
    return root


def test_tree_ingestion_uses_repo_dir_and_extension(tmp_path):
    docs = list(ingest_tree(make_tree(tmp_path / "root")))
    assert [(d.repo, d.lang, d.text) for d in docs] == [
        ("projA", "Python", b"print(1)\n"),
        ("projC", "Rust", b"fn main() {}\n"),
    ]


def test_custom_extension_map(tmp_path):
    root = make_tree(tmp_path / "root")
    cfg = tmp_path / "ext.toml"
    cfg.write_text('txt = "Text"\n')
    docs = list(ingest_tree(root, ExtensionMap.load(cfg)))
    assert [(d.repo, d.lang) for d in docs] == [("projB", "Text")]


def test_extension_map_list_form_and_conflicts(tmp_path):
    cfg = tmp_path / "ext.json"
    cfg.write_text(json.dumps({"extensions": {"Python": ["py", "pyi"]}}))
    m = ExtensionMap.load(cfg)
    assert m.language_of("a/b.PYI") == "Python"
    with pytest.raises(CorpusError):
        ExtensionMap({"py": "Python", ".PY": "Snake"})


def test_default_map_covers_all_languages():
    m = ExtensionMap.default()
    assert set(m.values()) == set(LANGUAGE_EXTENSIONS)
    assert len(LANGUAGE_EXTENSIONS) == 18
    assert m["cs"] == "C#" and m["mli"] == "OCaml" and m["hpp"] == "C++"


def test_load_corpus_dispatch_and_missing(tmp_path):
    p = write_jsonl(tmp_path / "c.jsonl", [{"text": "x", "repo": "r", "lang": "Go"}])
    assert len(list(load_corpus(p))) == 1
    assert len(list(load_corpus(make_tree(tmp_path / "root")))) == 2
    with pytest.raises(FileNotFoundError, match="corpus not found"):
        load_corpus(tmp_path / "nope")


def test_document_requires_repo_and_lang():
    with pytest.raises(CorpusError):
        Document(b"x", "", "Go")


@pytest.mark.parametrize(
    "text, pieces",
    [
        (b"import numpy", [b"import", b" numpy"]),
        (b"", []),
        (b"123456", [b"123456"]),
        (b"snake_case = x", [b"snake_case", b" ", b"=", b" x"]),
        (b"if (a):\n    b", [b"if", b" ", b"(", b"a", b"):", b"\n", b"   ", b" b"]),
    ],
)
def test_default_pattern_examples(text, pieces):
    assert DEFAULT_PRETOKENIZER.split(text) == pieces


def test_import_numpy_matches_reference_pretokenizer():
    regex = pytest.importorskip("regex")
    assert regex.findall(GPT2_PATTERN, "import numpy") == [p.decode() for p in DEFAULT_PRETOKENIZER.split(b"import numpy")]


def test_utf8_characters_stay_whole():
    for piece in DEFAULT_PRETOKENIZER.split("naïve café → ok".encode()):
        piece.decode("utf-8")


def test_pretokenize_counts_in_first_seen_order():
    assert pretokenize(Document(b"a b a", "r", "Go")) == [(b"a", 1), (b" b", 1), (b" a", 1)]
    assert pretokenize(Document(b"x x x", "r", "Go")) == [(b"x", 1), (b" x", 2)]


def test_invalid_pattern():
    with pytest.raises(ValueError, match="pattern"):
        Pretokenizer("(")


def test_pretokenizer_serialization():
    pre = Pretokenizer(r"[a-z]+")
    assert Pretokenizer.from_dict(pre.to_dict()) == pre


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=300))
def test_split_is_lossless(data):
    assert b"".join(DEFAULT_PRETOKENIZER.split(data)) == data


@settings(max_examples=100, deadline=None)
@given(st.binary(max_size=120), st.sampled_from([r"[a-z]+", r"\d", r"x|y+", r" ?\w+"]))
def test_split_is_lossless_for_any_pattern(data, pattern):
    pieces = Pretokenizer(pattern).split(data)
    assert b"".join(pieces) == data
    assert all(pieces)

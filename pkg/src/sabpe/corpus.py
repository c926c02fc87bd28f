"""Corpus ingestion with repository/language attribution, and pre-tokenization.

Documents come either from a JSONL file (one ``{"text", "repo", "lang"}``
object per line) or from a directory tree where every top-level directory is
a repository and the language is inferred from the file extension.
"""

from __future__ import annotations

import json
import logging
import os
import re
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from pathlib import Path

from ._config import load_mapping_file

logger = logging.getLogger(__name__)


class CorpusError(ValueError):
    """Raised for malformed corpus input."""


@dataclass(frozen=True, slots=True)
class Document:
    text: bytes
    repo: str
    lang: str

    def __post_init__(self) -> None:
        if not self.repo:
            raise CorpusError("document repo must be non-empty")
        if not self.lang:
            raise CorpusError("document lang must be non-empty")


# Language -> extensions used when assembling evaluation sets from repositories.
LANGUAGE_EXTENSIONS: dict[str, tuple[str, ...]] = {
    "Java": ("java",),
    "C#": ("cs",),
    "C++": ("cpp", "hpp"),
    "Python": ("py",),
    "Haskell": ("hs",),
    "Dart": ("dart",),
    "Go": ("go",),
    "JavaScript": ("js",),
    "Julia": ("jl",),
    "Kotlin": ("kt",),
    "Ruby": ("rb",),
    "Rust": ("rs",),
    "Scala": ("scala", "sc"),
    "Swift": ("swift",),
    "Vue": ("vue",),
    "PHP": ("php",),
    "Lua": ("lua",),
    "OCaml": ("ml", "mli"),
}


class ExtensionMap(Mapping[str, str]):
    """Read-only mapping from a file extension (no dot, lowercase) to a language."""

    def __init__(self, mapping: Mapping[str, str]):
        self._map = {}
        for ext, lang in mapping.items():
            key = ext.lower().lstrip(".")
            if not key or not lang:
                raise CorpusError(f"invalid extension mapping {ext!r} -> {lang!r}")
            if key in self._map and self._map[key] != lang:
                raise CorpusError(
                    f"extension {key!r} mapped to both {self._map[key]!r} and {lang!r}"
                )
            self._map[key] = lang

    @classmethod
    def from_languages(cls, languages: Mapping[str, Iterable[str]]) -> ExtensionMap:
        return cls({ext: lang for lang, exts in languages.items() for ext in exts})

    @classmethod
    def default(cls) -> ExtensionMap:
        return cls.from_languages(LANGUAGE_EXTENSIONS)

    @classmethod
    def load(cls, path: str | os.PathLike) -> ExtensionMap:
        """Load a TOML or JSON file.

        Two shapes are accepted: ``ext = "Language"`` pairs, or
        ``Language = ["ext", ...]`` lists (the latter mirrors the default table).
        """
        data = load_mapping_file(path)
        data = data.get("extensions", data)
        flat: dict[str, str] = {}
        pairs: list[tuple[str, str]] = []
        for key, value in data.items():
            if isinstance(value, str):
                pairs.append((key, value))
            elif isinstance(value, list) and all(isinstance(v, str) for v in value):
                pairs.extend((ext, key) for ext in value)
            else:
                raise CorpusError(f"{path}: bad extension entry for {key!r}")
        for ext, lang in pairs:
            ext = ext.lower().lstrip(".")
            if ext in flat and flat[ext] != lang:
                raise CorpusError(f"{path}: extension {ext!r} mapped twice")
            flat[ext] = lang
        return cls(flat)

    def language_of(self, path: str | os.PathLike) -> str | None:
        suffix = Path(path).suffix
        return self._map.get(suffix[1:].lower()) if suffix else None

    def __getitem__(self, key: str) -> str:
        return self._map[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._map)

    def __len__(self) -> int:
        return len(self._map)


def ingest_jsonl(path: str | os.PathLike) -> Iterator[Document]:
    """Yield one Document per non-blank line of a JSONL file, in file order."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"malformed JSON at line {lineno}: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise CorpusError(f"expected a JSON object at line {lineno}")
            for name in ("text", "repo", "lang"):
                if name not in obj:
                    raise CorpusError(f"missing field {name} at line {lineno}")
                if not isinstance(obj[name], str):
                    raise CorpusError(f"field {name} must be a string at line {lineno}")
            try:
                yield Document(obj["text"].encode("utf-8", "surrogatepass"), obj["repo"], obj["lang"])
            except CorpusError as exc:
                raise CorpusError(f"{exc} at line {lineno}") from None


def _walk_sorted(root: Path) -> Iterator[Path]:
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for name in sorted(filenames):
            yield Path(dirpath, name)


def ingest_tree(root: str | os.PathLike, ext_map: Mapping[str, str] | None = None) -> Iterator[Document]:
    """Yield documents for every mapped file below ``root``, sorted by path.

    The repository is the first path component under ``root``; files that sit
    directly in ``root`` have no repository and are skipped.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus not found: {root}")
    emap = ext_map if isinstance(ext_map, ExtensionMap) else ExtensionMap(ext_map or ExtensionMap.default())
    for path in _walk_sorted(root):
        rel = path.relative_to(root)
        lang = emap.language_of(path)
        if lang is None:
            continue
        if len(rel.parts) < 2:
            logger.warning("skipping %s: not inside a repository directory", rel)
            continue
        try:
            text = path.read_bytes()
        except OSError as exc:
            logger.warning("skipping unreadable file %s: %s", path, exc)
            continue
        yield Document(text, rel.parts[0], lang)


def load_corpus(path: str | os.PathLike, ext_map: Mapping[str, str] | None = None) -> Iterator[Document]:
    """Dispatch on ``path``: directories go through ingest_tree, files through ingest_jsonl."""
    p = Path(path)
    if p.is_dir():
        return ingest_tree(p, ext_map)
    if p.is_file():
        return ingest_jsonl(p)
    raise FileNotFoundError(f"corpus not found: {p}")


# Letters include "_" so identifiers like snake_case stay in one run, and every
# byte >= 0x80 so multi-byte UTF-8 characters are never split.
DEFAULT_PATTERN = (
    r" ?[A-Za-z_\x80-\xff]+"
    r"|[0-9]+"
    r"|[^A-Za-z_\x80-\xff0-9\s]+"
    r"|[\r\n]+"
    r"|[ \t\f\v]+(?![A-Za-z_\x80-\xff])"
    r"|[ \t\f\v]+"
)


@dataclass(frozen=True)
class Pretokenizer:
    """Splits raw bytes into merge-barrier units with a bytes regex.

    Any bytes the pattern does not match become their own unit, so splitting
    is lossless for every pattern.
    """

    pattern: str = DEFAULT_PATTERN
    _regex: re.Pattern = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        try:
            compiled = re.compile(self.pattern.encode("latin-1"))
        except (re.error, UnicodeEncodeError) as exc:
            raise ValueError(f"invalid pre-tokenization pattern: {exc}") from None
        object.__setattr__(self, "_regex", compiled)

    def split(self, text: bytes) -> list[bytes]:
        out: list[bytes] = []
        pos = 0
        for m in self._regex.finditer(text):
            start, end = m.span()
            if start == end:
                continue
            if start > pos:
                out.append(text[pos:start])
            out.append(text[start:end])
            pos = end
        if pos < len(text):
            out.append(text[pos:])
        return out

    def count(self, text: bytes) -> dict[bytes, int]:
        counts: dict[bytes, int] = {}
        get = counts.get
        for piece in self.split(text):
            counts[piece] = get(piece, 0) + 1
        return counts

    def to_dict(self) -> dict:
        return {"pattern": self.pattern}

    @classmethod
    def from_dict(cls, data: Mapping) -> Pretokenizer:
        return cls(pattern=data.get("pattern", DEFAULT_PATTERN))


DEFAULT_PRETOKENIZER = Pretokenizer()


def pretokenize(doc: Document, pretokenizer: Pretokenizer = DEFAULT_PRETOKENIZER) -> list[tuple[bytes, int]]:
    """Pre-tokens of one document with their in-document counts, in first-seen order."""
    return list(pretokenizer.count(doc.text).items())

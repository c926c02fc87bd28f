"""The trained artifact: vocabulary, ordered merges and pre-tokenization config.

Inference is plain byte-level BPE: each pre-token starts as its bytes and the
lowest-rank applicable merge is applied until none applies.
"""

from __future__ import annotations

import json
import os
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .corpus import DEFAULT_PRETOKENIZER, Pretokenizer

FORMAT_NAME = "sabpe-tokenizer"
FORMAT_VERSION = 1


class TokenizerError(ValueError):
    """Invalid tokenizer contents or file."""


# ---------------------------------------------------------------------------
# byte-string escaping
# ---------------------------------------------------------------------------

_ESCAPE_TABLE = [chr(b) if 0x20 <= b < 0x7F and b != 0x5C else f"\\x{b:02x}" for b in range(256)]
_ESCAPE_TABLE[0x5C] = "\\\\"
_UNESCAPE_RE = re.compile(r"\\(?:x([0-9a-fA-F]{2})|(\\))")


def escape_bytes(data: bytes) -> str:
    """Printable ASCII stays as is, ``\\`` doubles, everything else becomes ``\\xNN``."""
    return "".join(_ESCAPE_TABLE[b] for b in data)


def unescape_bytes(text: str) -> bytes:
    out = bytearray()
    pos = 0
    for m in _UNESCAPE_RE.finditer(text):
        chunk = text[pos : m.start()]
        if "\\" in chunk:
            raise TokenizerError(f"bad escape in {text!r}")
        out += chunk.encode("ascii")
        out.append(int(m.group(1), 16) if m.group(1) else 0x5C)
        pos = m.end()
    tail = text[pos:]
    if "\\" in tail:
        raise TokenizerError(f"bad escape in {text!r}")
    try:
        out += tail.encode("ascii")
    except UnicodeEncodeError:
        raise TokenizerError(f"non-ASCII character in escaped token {text!r}") from None
    return bytes(out)


# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class MergeRule:
    rank: int
    left: int
    right: int
    result: int


@dataclass(frozen=True, slots=True)
class MergeNode:
    id: int
    left: MergeNode | None = None
    right: MergeNode | None = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def leaves(self) -> list[int]:
        if self.left is None:
            return [self.id]
        return self.left.leaves() + self.right.leaves()

    def depth(self) -> int:
        if self.left is None:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())


class Tokenizer:
    """Immutable byte-level BPE tokenizer.

    Ids ``0..255`` are the single bytes, followed by the reserved tokens, then
    merged tokens.  A merged token may be produced by more than one rule when
    two merge paths concatenate to the same bytes; vocabulary entries stay unique.
    """

    def __init__(
        self,
        vocab: Sequence[bytes],
        merges: Iterable[tuple[int, int, int]],
        *,
        special: Iterable[int] = (),
        pretokenizer: Pretokenizer = DEFAULT_PRETOKENIZER,
        parse_special: bool = False,
        metadata: Mapping[str, Any] | None = None,
    ):
        self._vocab = tuple(bytes(v) for v in vocab)
        self._merges = tuple(MergeRule(rank, l, r, z) for rank, (l, r, z) in enumerate(merges))
        self._special = tuple(special)
        self.pretokenizer = pretokenizer
        self.parse_special = parse_special
        self._metadata = dict(metadata or {})
        self.validate()
        self._ranks = {}
        self._first_rank = {}
        for rule in self._merges:
            self._ranks.setdefault((rule.left, rule.right), (rule.rank, rule.result))
            self._first_rank.setdefault(rule.result, rule.rank)
        # rules whose result already existed: only one occurrence may be merged at a time
        self._reused = {rule.rank for rule in self._merges if self._first_rank[rule.result] != rule.rank}
        self._ids = {v: i for i, v in enumerate(self._vocab)}
        self._special_re = (
            re.compile(b"|".join(re.escape(self._vocab[i]) for i in sorted(self._special, key=lambda i: -len(self._vocab[i]))))
            if self._special
            else None
        )
        self._cache: dict[bytes, tuple[int, ...]] = {}

    # -- accessors ---------------------------------------------------------------

    @property
    def vocab(self) -> tuple[bytes, ...]:
        return self._vocab

    @property
    def merges(self) -> tuple[MergeRule, ...]:
        return self._merges

    @property
    def special(self) -> tuple[int, ...]:
        return self._special

    @property
    def metadata(self) -> dict[str, Any]:
        return dict(self._metadata)

    def __len__(self) -> int:
        return len(self._vocab)

    def token_id(self, token: bytes) -> int | None:
        return self._ids.get(token)

    def merged_ids(self) -> list[int]:
        """Ids of merged tokens (neither base bytes nor reserved), ascending."""
        special = set(self._special)
        return [i for i in range(256, len(self._vocab)) if i not in special]

    def creation_rank(self, token_id: int) -> int | None:
        return self._first_rank.get(token_id)

    # -- validation --------------------------------------------------------------

    def validate(self) -> None:
        vocab = self._vocab
        if len(vocab) < 256 or any(vocab[i] != bytes([i]) for i in range(256)):
            raise TokenizerError("the first 256 vocabulary entries must be the single bytes")
        if len(set(vocab)) != len(vocab):
            raise TokenizerError("vocabulary entries must be unique")
        n = len(vocab)
        special = set(self._special)
        if len(special) != len(self._special) or any(not 256 <= i < n for i in special):
            raise TokenizerError("reserved token ids must be distinct non-byte ids")
        if any(not vocab[i] for i in special):
            raise TokenizerError("reserved tokens must be non-empty")
        created: dict[int, int] = {}
        for rule in self._merges:
            for part in (rule.left, rule.right, rule.result):
                if not 0 <= part < n:
                    raise TokenizerError(f"merge rank {rule.rank} references unknown id {part}")
            if rule.left in special or rule.right in special or rule.result in special:
                raise TokenizerError(f"merge rank {rule.rank} involves a reserved token")
            if rule.result < 256:
                raise TokenizerError(f"merge rank {rule.rank} produces a base byte")
            for part in (rule.left, rule.right):
                if part >= 256 and part not in created:
                    raise TokenizerError(f"merge rank {rule.rank} uses token {part} before it is created")
            if vocab[rule.result] != vocab[rule.left] + vocab[rule.right]:
                raise TokenizerError(f"merge rank {rule.rank} result bytes do not match its parts")
            created.setdefault(rule.result, rule.rank)
        missing = [i for i in range(256, n) if i not in special and i not in created]
        if missing:
            raise TokenizerError(f"tokens without a creating merge: {missing[:5]}")

    # -- encode / decode ---------------------------------------------------------

    def _encode_piece(self, piece: bytes) -> tuple[int, ...]:
        cached = self._cache.get(piece)
        if cached is not None:
            return cached
        ids = list(piece)
        ranks = self._ranks
        reused = self._reused
        while len(ids) > 1:
            best = None
            best_pos = -1
            for pos in range(len(ids) - 1):
                hit = ranks.get((ids[pos], ids[pos + 1]))
                if hit is not None and (best is None or hit[0] < best[0]):
                    best = hit
                    best_pos = pos
            if best is None:
                break
            rank, result = best
            left, right = ids[best_pos], ids[best_pos + 1]
            if rank in reused:
                ids[best_pos : best_pos + 2] = [result]
                continue
            out = ids[:best_pos]
            i = best_pos
            n = len(ids)
            while i < n:
                if i + 1 < n and ids[i] == left and ids[i + 1] == right:
                    out.append(result)
                    i += 2
                else:
                    out.append(ids[i])
                    i += 1
            ids = out
        result_ids = tuple(ids)
        if len(self._cache) > 200_000:
            self._cache.clear()
        self._cache[piece] = result_ids
        return result_ids

    def encode_pretoken(self, piece: bytes) -> tuple[int, ...]:
        """Encode one already pre-tokenized unit (no further splitting)."""
        if len(piece) < 2:
            return tuple(piece)
        return self._encode_piece(piece)

    def encode(self, text: bytes, *, parse_special: bool | None = None) -> list[int]:
        if isinstance(text, str):
            text = text.encode("utf-8")
        use_special = self.parse_special if parse_special is None else parse_special
        out: list[int] = []
        if use_special and self._special_re is not None:
            pos = 0
            for m in self._special_re.finditer(text):
                if m.start() > pos:
                    out.extend(self._encode_plain(text[pos : m.start()]))
                out.append(self._ids[m.group(0)])
                pos = m.end()
            if pos < len(text):
                out.extend(self._encode_plain(text[pos:]))
            return out
        return self._encode_plain(text)

    def _encode_plain(self, text: bytes) -> list[int]:
        out: list[int] = []
        extend = out.extend
        enc = self._encode_piece
        for piece in self.pretokenizer.split(text):
            if len(piece) == 1:
                out.append(piece[0])
            else:
                extend(enc(piece))
        return out

    def decode(self, ids: Iterable[int]) -> bytes:
        vocab = self._vocab
        n = len(vocab)
        parts = []
        for i in ids:
            if not isinstance(i, int) or not 0 <= i < n:
                raise TokenizerError(f"unknown token id {i}")
            parts.append(vocab[i])
        return b"".join(parts)

    # -- merge tree --------------------------------------------------------------

    def merge_tree(self, token_id: int) -> MergeNode:
        if not 0 <= token_id < len(self._vocab):
            raise TokenizerError(f"unknown token id {token_id}")
        rank = self._first_rank.get(token_id)
        if rank is None:
            return MergeNode(token_id)
        rule = self._merges[rank]
        return MergeNode(token_id, self.merge_tree(rule.left), self.merge_tree(rule.right))

    def render_tree(self, token_id: int | MergeNode, levels: int | None = None) -> str:
        """Bracket notation: ``[left right]`` per merge, expanded for at most ``levels`` levels."""
        node = self.merge_tree(token_id) if isinstance(token_id, int) else token_id

        def walk(n: MergeNode, budget: int | None) -> str:
            if n.left is None or budget == 0:
                return escape_bytes(self._vocab[n.id])
            nxt = None if budget is None else budget - 1
            return f"[{walk(n.left, nxt)} {walk(n.right, nxt)}]"

        return walk(node, levels)

    # -- derived tokenizers ------------------------------------------------------

    def without_rules(self, drop_ranks: Iterable[int]) -> Tokenizer:
        """A tokenizer with the given merge ranks removed.

        Merged tokens left without any creating rule are dropped and the
        remaining ids are compacted, preserving relative order.
        """
        drop = set(drop_ranks)
        kept = [r for r in self._merges if r.rank not in drop]
        produced = {r.result for r in kept}
        special = set(self._special)
        keep_ids = [i for i in range(len(self._vocab)) if i < 256 or i in special or i in produced]
        remap = {old: new for new, old in enumerate(keep_ids)}
        try:
            merges = [(remap[r.left], remap[r.right], remap[r.result]) for r in kept]
        except KeyError as exc:
            raise TokenizerError(f"removing rules orphans token {exc.args[0]}") from None
        return Tokenizer(
            [self._vocab[i] for i in keep_ids],
            merges,
            special=[remap[i] for i in self._special],
            pretokenizer=self.pretokenizer,
            parse_special=self.parse_special,
            metadata=self._metadata,
        )

    # -- persistence -------------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "pretokenizer": self.pretokenizer.to_dict(),
            "parse_special": self.parse_special,
            "special": list(self._special),
            "vocab": [escape_bytes(v) for v in self._vocab],
            "merges": [[r.left, r.right, r.result] for r in self._merges],
            "metadata": self._metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, ensure_ascii=True) + "\n"

    def save(self, path: str | os.PathLike) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_json(cls, text: str) -> Tokenizer:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            if exc.pos >= len(text.rstrip()):
                raise TokenizerError("malformed tokenizer file: unexpected end of input") from None
            raise TokenizerError(f"malformed tokenizer file: {exc.msg} at line {exc.lineno}") from None
        if not isinstance(data, dict) or data.get("format") != FORMAT_NAME:
            raise TokenizerError("not a tokenizer file (missing format marker)")
        if data.get("version") != FORMAT_VERSION:
            raise TokenizerError(
                f"unsupported tokenizer file version {data.get('version')!r} (expected {FORMAT_VERSION})"
            )
        try:
            vocab = [unescape_bytes(v) for v in data["vocab"]]
            merges = [tuple(int(x) for x in m) for m in data["merges"]]
            if any(len(m) != 3 for m in merges):
                raise TokenizerError("each merge must be [left, right, result]")
            return cls(
                vocab,
                merges,
                special=[int(i) for i in data.get("special", [])],
                pretokenizer=Pretokenizer.from_dict(data.get("pretokenizer", {})),
                parse_special=bool(data.get("parse_special", False)),
                metadata=data.get("metadata", {}),
            )
        except KeyError as exc:
            raise TokenizerError(f"malformed tokenizer file: missing key {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, TokenizerError):
                raise
            raise TokenizerError(f"malformed tokenizer file: {exc}") from None

    @classmethod
    def load(cls, path: str | os.PathLike) -> Tokenizer:
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def bytes_only(cls, reserved: Iterable[bytes] = ()) -> Tokenizer:
        reserved = list(reserved)
        return cls([bytes([i]) for i in range(256)] + reserved, [], special=range(256, 256 + len(reserved)))


def encode(tok: Tokenizer, text: bytes) -> list[int]:
    return tok.encode(text)


def decode(tok: Tokenizer, ids: Iterable[int]) -> bytes:
    return tok.decode(ids)

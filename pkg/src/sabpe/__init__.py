"""Byte-level BPE with repository/language source attribution."""

__version__ = "0.1.0"

from .corpus import Document, ExtensionMap, Pretokenizer, ingest_jsonl, ingest_tree, load_corpus, pretokenize
from .tokenizer import Tokenizer
from .trainer import PriorityCriterion, SkipCriterion, TrainConfig, score, train

__all__ = [
    "Document",
    "ExtensionMap",
    "Pretokenizer",
    "PriorityCriterion",
    "SkipCriterion",
    "Tokenizer",
    "TrainConfig",
    "ingest_jsonl",
    "ingest_tree",
    "load_corpus",
    "pretokenize",
    "score",
    "train",
]

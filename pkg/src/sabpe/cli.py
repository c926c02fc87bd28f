"""Command line entry point: ``sabpe <command> ...``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any

from . import __version__
from ._config import load_mapping_file
from .attribution import collect_words
from .classifier import classify_report
from .corpus import CorpusError, ExtensionMap, Pretokenizer, load_corpus
from .metrics import EvalCorpus, evaluate, frequencies_csv, mean_token_length, name_part_histogram, count_three_digit, report_rows_csv, token_frequencies, vocab_diff
from .pruner import PruneError, PruneOrder, curve_csv, prune_by_score, prune_curve, prune_reverse, read_scores, removal_log_csv
from .tokenizer import Tokenizer, TokenizerError, unescape_bytes
from .trainer import DEFAULT_RESERVED, SkipCriterion, TrainConfig, TrainingError, export_history, train

logger = logging.getLogger("sabpe")


class UsageError(Exception):
    pass


# keys accepted in a training config file; flags use the same names with dashes
TRAIN_KEYS = ("corpus", "out", "history", "vocab_size", "criterion", "min_repos", "min_langs",
              "reserved_tokens", "pattern", "extension_map", "threads")
TRAIN_DEFAULTS: dict[str, Any] = {
    "out": "tokenizer.json",
    "history": None,
    "vocab_size": 32768,
    "criterion": "f",
    "min_repos": 1,
    "min_langs": 1,
    "reserved_tokens": list(DEFAULT_RESERVED),
    "pattern": None,
    "extension_map": None,
    "threads": None,
}


def _ext_map(path: str | None) -> ExtensionMap | None:
    return ExtensionMap.load(path) if path else None


def _corpus_path(path: str | None) -> Path:
    if not path:
        raise UsageError("corpus not found: no corpus path given")
    p = Path(path)
    if not p.exists():
        raise UsageError(f"corpus not found: {p}")
    return p


def _load_tokenizer(path: str) -> Tokenizer:
    if not Path(path).is_file():
        raise UsageError(f"tokenizer not found: {path}")
    return Tokenizer.load(path)


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _merge_config(args: argparse.Namespace, keys: Sequence[str], defaults: dict[str, Any]) -> dict[str, Any]:
    cfg = dict(defaults)
    if getattr(args, "config", None):
        data = load_mapping_file(args.config)
        unknown = set(data) - set(keys)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(data)
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def _train_config(cfg: dict[str, Any]) -> TrainConfig:
    reserved = cfg["reserved_tokens"]
    if isinstance(reserved, str):
        reserved = [t for t in reserved.split(",") if t]
    try:
        return TrainConfig(
            vocab_size=int(cfg["vocab_size"]),
            priority=cfg["criterion"],
            skip=SkipCriterion(int(cfg["min_repos"]), int(cfg["min_langs"])),
            reserved_tokens=reserved,
            pretokenizer=Pretokenizer(cfg["pattern"]) if cfg.get("pattern") else Pretokenizer(),
            threads=None if cfg.get("threads") is None else int(cfg["threads"]),
        )
    except (TrainingError, ValueError) as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _merge_config(args, TRAIN_KEYS, TRAIN_DEFAULTS)
    corpus = _corpus_path(cfg.get("corpus"))
    tcfg = _train_config(cfg)
    if args.debug:
        tcfg.debug = True
    result = train(load_corpus(corpus, _ext_map(cfg.get("extension_map"))), tcfg)
    out = Path(cfg["out"])
    result.tokenizer.save(out)
    history = cfg.get("history") or str(out.with_suffix("")) + ".history.csv"
    Path(history).write_text(export_history(result.history, result.tokenizer.vocab), encoding="utf-8")
    logger.info(
        "%s: %d tokens, %d executed / %d skipped steps (%s)",
        out, len(result.tokenizer), result.executed_steps, result.skipped_steps, result.status,
    )
    return 0


def cmd_encode(args: argparse.Namespace) -> int:
    tok = _load_tokenizer(args.tokenizer)
    data = sys.stdin.buffer.read()
    ids = tok.encode(data, parse_special=args.special or None)
    sys.stdout.write(" ".join(map(str, ids)) + "\n")
    return 0


def cmd_decode(args: argparse.Namespace) -> int:
    tok = _load_tokenizer(args.tokenizer)
    text = sys.stdin.read().split()
    try:
        ids = [int(t) for t in text]
    except ValueError as exc:
        raise UsageError(f"token ids must be decimal integers: {exc}") from None
    sys.stdout.buffer.write(tok.decode(ids))
    sys.stdout.flush()
    return 0


def _eval_corpus(path: str | None, tok: Tokenizer, ext_map: str | None) -> EvalCorpus:
    return EvalCorpus.from_documents(load_corpus(_corpus_path(path), _ext_map(ext_map)), tok.pretokenizer)


def cmd_eval(args: argparse.Namespace) -> int:
    tok = _load_tokenizer(args.tokenizer)
    report = evaluate(tok, _eval_corpus(args.corpus, tok, args.extension_map), mtl_include_base=args.mtl_include_base)
    if args.format == "json":
        _write(args.out, report.to_json())
    else:
        row = {"name": args.name or Path(args.tokenizer).stem, "criterion": tok.metadata.get("criterion", "")}
        flat = report.flat_row()
        if not args.per_language:
            flat = {k: v for k, v in flat.items() if "[" not in k}
        row.update(flat)
        _write(args.out, report_rows_csv([row]))
    return 0


def _checkpoints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad checkpoint list {text!r}") from None


def cmd_prune(args: argparse.Namespace) -> int:
    tok = _load_tokenizer(args.tokenizer)
    if args.order == "score":
        if not args.scores:
            raise UsageError("--order score needs --scores")
        order = PruneOrder.by_score(read_scores(args.scores))
    else:
        order = PruneOrder.reverse()
    if args.checkpoints:
        ec = _eval_corpus(args.corpus, tok, args.extension_map)
        points = prune_curve(tok, ec, order, _checkpoints(args.checkpoints))
        _write(args.out, curve_csv(points))
    if args.k is not None:
        if not args.save:
            raise UsageError("--k needs --save")
        if order.kind == "reverse":
            pruned = prune_reverse(tok, args.k)
        else:
            pruned, log = prune_by_score(tok, order.scores, args.k)
            if args.log:
                Path(args.log).write_text(removal_log_csv(log), encoding="utf-8")
        pruned.save(args.save)
    if not args.checkpoints and args.k is None:
        raise UsageError("nothing to do: give --checkpoints and/or --k")
    return 0


def cmd_classify(args: argparse.Namespace) -> int:
    if args.tokens:
        lines = Path(args.tokens).read_text(encoding="utf-8").splitlines()
        tokens = []
        for lineno, line in enumerate(lines, start=1):
            if not line:
                continue
            try:
                tokens.append(unescape_bytes(line))
            except TokenizerError as exc:
                raise UsageError(f"{args.tokens}:{lineno}: {exc}") from None
    elif args.tokenizer:
        tok = _load_tokenizer(args.tokenizer)
        if args.ids:
            raw = Path(args.ids).read_text(encoding="utf-8").split()
            try:
                ids = [int(x) for x in raw]
            except ValueError as exc:
                raise UsageError(f"{args.ids}: {exc}") from None
        else:
            ids = tok.merged_ids()
        bad = [i for i in ids if not 0 <= i < len(tok)]
        if bad:
            raise UsageError(f"unknown token id {bad[0]}")
        tokens = [tok.vocab[i] for i in ids]
    else:
        raise UsageError("give --tokens or --tokenizer")
    report = classify_report(tokens)
    _write(args.out, report.to_json() if args.format == "json" else report.to_csv())
    return 0


def cmd_diff(args: argparse.Namespace) -> int:
    a, b = _load_tokenizer(args.a), _load_tokenizer(args.b)
    diff = vocab_diff(a, b)
    print(diff.count)
    if args.json:
        Path(args.json).write_text(json.dumps(diff.to_dict(), indent=1) + "\n", encoding="utf-8")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    tok = _load_tokenizer(args.tokenizer)
    hist = name_part_histogram(tok)
    meta = tok.metadata
    data = {
        "vocab_size": len(tok),
        "merges": len(tok.merges),
        "criterion": meta.get("criterion"),
        "mean_token_length": mean_token_length(tok),
        "mean_token_length_with_bytes": mean_token_length(tok, include_base=True),
        "three_digit_count": count_three_digit(tok),
        "name_parts": {
            "camel": {str(k): v for k, v in sorted(hist.camel.items())},
            "snake": {str(k): v for k, v in sorted(hist.snake.items())},
        },
        "steps_executed": meta.get("steps_executed"),
        "steps_skipped": meta.get("steps_skipped"),
    }
    if args.frequencies:
        ec = _eval_corpus(args.corpus, tok, args.extension_map)
        Path(args.frequencies).write_text(frequencies_csv(token_frequencies(tok, ec)), encoding="utf-8")
    if args.tree is not None:
        data["tree"] = tok.render_tree(args.tree, args.levels)
    _write(args.out, json.dumps(data, indent=2) + "\n")
    return 0


# -- sweep -------------------------------------------------------------------

SWEEP_KEYS = ("corpus", "eval_corpus", "out_dir", "vocab_size", "reserved_tokens", "pattern",
              "extension_map", "cells", "grid", "jobs")


def sweep_cells(cfg: dict[str, Any]) -> list[dict[str, Any]]:
    cells = [dict(c) for c in cfg.get("cells") or []]
    grid = cfg.get("grid") or {}
    if grid:
        axes = {k: grid.get(k, [TRAIN_DEFAULTS[k]]) for k in ("criterion", "min_repos", "min_langs")}
        if any(not v for v in axes.values()):
            return cells
        for crit, mr, ml in itertools.product(axes["criterion"], axes["min_repos"], axes["min_langs"]):
            cells.append({"criterion": crit, "min_repos": mr, "min_langs": ml})
    for c in cells:
        c.setdefault("criterion", "f")
        c.setdefault("min_repos", 1)
        c.setdefault("min_langs", 1)
        c.setdefault("name", f"{str(c['criterion']).lower()}_r{c['min_repos']}_l{c['min_langs']}")
    names = [c["name"] for c in cells]
    if len(set(names)) != len(names):
        raise UsageError("sweep cell names must be unique")
    return cells


def _run_cell(cell: dict[str, Any], cfg: dict[str, Any], table, ec: EvalCorpus | None, out_dir: str) -> dict[str, Any]:
    row: dict[str, Any] = {
        "name": cell["name"],
        "criterion": str(cell["criterion"]).upper(),
        "min_repos": cell["min_repos"],
        "min_langs": cell["min_langs"],
    }
    try:
        tcfg = _train_config({**TRAIN_DEFAULTS, **cfg, **cell})
        result = train(table, tcfg)
        base = Path(out_dir, cell["name"])
        result.tokenizer.save(str(base) + ".json")
        Path(str(base) + ".history.csv").write_text(
            export_history(result.history, result.tokenizer.vocab), encoding="utf-8"
        )
        row["status"] = result.status
        if ec is not None:
            row.update(evaluate(result.tokenizer, ec).flat_row())
        else:
            row.update(steps_executed=result.executed_steps, steps_skipped=result.skipped_steps)
    except Exception as exc:  # a failing cell is reported, not fatal
        row["status"] = f"failed: {exc}"
    return row


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = load_mapping_file(args.config)
    unknown = set(cfg) - set(SWEEP_KEYS)
    if unknown:
        raise UsageError(f"unknown sweep keys: {', '.join(sorted(unknown))}")
    cells = sweep_cells(cfg)
    if not cells:
        raise UsageError("empty sweep")
    base_dir = Path(args.config).parent
    corpus = _corpus_path(str(base_dir / cfg["corpus"]) if cfg.get("corpus") else None)
    out_dir = Path(args.out_dir or cfg.get("out_dir") or "sweep")
    if not out_dir.is_absolute() and not args.out_dir:
        out_dir = base_dir / out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    ext_map = _ext_map(str(base_dir / cfg["extension_map"]) if cfg.get("extension_map") else None)
    pre = Pretokenizer(cfg["pattern"]) if cfg.get("pattern") else Pretokenizer()
    table = collect_words(load_corpus(corpus, ext_map), pre)
    ec = None
    if cfg.get("eval_corpus"):
        ec = EvalCorpus.from_documents(load_corpus(_corpus_path(str(base_dir / cfg["eval_corpus"])), ext_map), pre)
    train_cfg = {k: cfg[k] for k in ("vocab_size", "reserved_tokens", "pattern") if k in cfg}
    jobs = int(args.jobs or cfg.get("jobs") or 1)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell, cells, itertools.repeat(train_cfg), itertools.repeat(table),
                                 itertools.repeat(ec), itertools.repeat(str(out_dir))))
    else:
        rows = [_run_cell(c, train_cfg, table, ec, str(out_dir)) for c in cells]
    (out_dir / "report.csv").write_text(report_rows_csv(rows), encoding="utf-8")
    failed = [r["name"] for r in rows if str(r["status"]).startswith("failed")]
    for r in rows:
        logger.info("%s: %s", r["name"], r["status"])
    if failed:
        logger.error("failed cells: %s", ", ".join(failed))
        return 1
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sabpe", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-q", "--quiet", action="store_true", help="only print warnings and errors")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a tokenizer")
    t.add_argument("--corpus", help="JSONL file or directory tree")
    t.add_argument("--config", help="TOML/JSON file with training keys")
    t.add_argument("--out")
    t.add_argument("--history", help="merge history CSV (default: <out>.history.csv)")
    t.add_argument("--vocab-size", "--vocab", dest="vocab_size", type=int)
    t.add_argument("--criterion", help="f, f_l, f_log_r1, f_log_r, f_log_r1_l, f_log_r_l")
    t.add_argument("--min-repos", dest="min_repos", type=int)
    t.add_argument("--min-langs", dest="min_langs", type=int)
    t.add_argument("--reserved", dest="reserved_tokens", help="comma-separated reserved tokens")
    t.add_argument("--pattern", help="pre-tokenization regex (bytes syntax)")
    t.add_argument("--extension-map", dest="extension_map")
    t.add_argument("--threads", type=int, help="worker processes for pre-tokenization (env SABPE_THREADS)")
    t.add_argument("--debug", action="store_true", help="check attribution monotonicity on every merge")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("encode", help="stdin bytes -> token ids")
    e.add_argument("--tokenizer", required=True)
    e.add_argument("--special", action="store_true", help="recognise reserved tokens in the input")
    e.set_defaults(func=cmd_encode)

    d = sub.add_parser("decode", help="token ids on stdin -> bytes")
    d.add_argument("--tokenizer", required=True)
    d.set_defaults(func=cmd_decode)

    ev = sub.add_parser("eval", help="compression rate, coverage, MTL, Gini")
    ev.add_argument("--tokenizer", required=True)
    ev.add_argument("--corpus", required=True)
    ev.add_argument("--per-language", action="store_true")
    ev.add_argument("--format", choices=("csv", "json"), default="csv")
    ev.add_argument("--name", help="row label in CSV output")
    ev.add_argument("--mtl-include-base", action="store_true")
    ev.add_argument("--extension-map", dest="extension_map")
    ev.add_argument("--out")
    ev.set_defaults(func=cmd_eval)

    pr = sub.add_parser("prune", help="pruning curves and pruned tokenizers")
    pr.add_argument("--tokenizer", required=True)
    pr.add_argument("--corpus")
    pr.add_argument("--order", choices=("reverse", "score"), default="reverse")
    pr.add_argument("--scores", help="CSV token_id,score (lower is pruned first)")
    pr.add_argument("--checkpoints", help="comma-separated removal counts")
    pr.add_argument("--k", type=int, help="prune this many tokens and --save the result")
    pr.add_argument("--save")
    pr.add_argument("--log", help="removal order CSV for score pruning")
    pr.add_argument("--extension-map", dest="extension_map")
    pr.add_argument("--out")
    pr.set_defaults(func=cmd_prune)

    c = sub.add_parser("classify", help="rule-based token categories")
    c.add_argument("--tokens", help="file with one escaped token per line")
    c.add_argument("--tokenizer")
    c.add_argument("--ids", help="whitespace-separated ids (default: all merged tokens)")
    c.add_argument("--format", choices=("csv", "json"), default="csv")
    c.add_argument("--out")
    c.set_defaults(func=cmd_classify)

    df = sub.add_parser("diff", help="count tokens present in only one vocabulary")
    df.add_argument("a")
    df.add_argument("b")
    df.add_argument("--json", help="write both one-sided token lists here")
    df.set_defaults(func=cmd_diff)

    s = sub.add_parser("stats", help="vocabulary statistics")
    s.add_argument("--tokenizer", required=True)
    s.add_argument("--corpus", help="needed for --frequencies")
    s.add_argument("--frequencies", help="write token frequency CSV here")
    s.add_argument("--tree", type=int, help="render the merge tree of this token id")
    s.add_argument("--levels", type=int, help="levels to expand in --tree")
    s.add_argument("--extension-map", dest="extension_map")
    s.add_argument("--out")
    s.set_defaults(func=cmd_stats)

    sw = sub.add_parser("sweep", help="train and evaluate a grid of configurations")
    sw.add_argument("--config", required=True)
    sw.add_argument("--out-dir", dest="out_dir")
    sw.add_argument("--jobs", type=int)
    sw.set_defaults(func=cmd_sweep)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"sabpe {args.command}: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"sabpe {args.command}: {exc}", file=sys.stderr)
        return 2
    except (CorpusError, TokenizerError, TrainingError, PruneError, ValueError, OSError) as exc:
        print(f"sabpe {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

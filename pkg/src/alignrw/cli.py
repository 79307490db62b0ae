"""Command-line interface: ``alignrw closure|rewrite|ask|validate|eval``."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .alignment import Alignment, alignment_to_json, build_dictionary, classify_pattern, load_alignment
from .closure import close
from .errors import (
    AlignmentError,
    EmptyQuestionError,
    FactsError,
    NoConfidentMatch,
    QuerySyntaxError,
    RewriteError,
    UnmappedVocabularyError,
)
from .expressions import Side
from .facts import generate_aligned_pair, load_facts, run_oracle, write_facts
from .nl import MATCHER_ENV, Lexicon, match_key, normalize_question
from .rewrite import generate_query_pair, rewrite_query
from .sparql import parse_select, serialize_select

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_UNMAPPED = 3
EXIT_NO_MATCH = 4
EXIT_ORACLE = 5

DEFAULT_ALIGNMENT = "ekaw-edas-mini.align.json"


def bundled(name: str) -> Path:
    """Path of a data file shipped with the package."""
    return Path(str(resources.files("alignrw") / "data" / name))


@dataclass
class RunConfig:
    alignment: Path
    command: str
    strict: bool = True
    min_confidence: float = 0.0
    threshold: float = 0.2
    invert: bool = False
    report: bool = False
    seed: int = 42
    out: Path | None = None

    def __post_init__(self):
        for name in ("min_confidence", "threshold"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name.replace('_', '-')} must lie in [0, 1], got {value}")


class _Output:
    def __init__(self, path: Path | None):
        self.path = path
        self.parts: list[str] = []

    def write(self, text: str = ""):
        self.parts.append(text)

    def flush(self):
        text = "\n".join(self.parts)
        if text and not text.endswith("\n"):
            text += "\n"
        if self.path is None:
            sys.stdout.write(text)
        else:
            self.path.write_text(text, encoding="utf-8")


def _err(message: str):
    print(f"alignrw: {message}", file=sys.stderr)


def _load(cfg: RunConfig) -> Alignment:
    alignment = load_alignment(cfg.alignment)
    return alignment.inverted() if cfg.invert else alignment


def _closed(cfg: RunConfig, alignment: Alignment):
    return close(alignment.correspondences, cfg.min_confidence)


def run_closure(cfg: RunConfig, out: _Output) -> int:
    alignment = _load(cfg)
    closed = Alignment(alignment.prefixes, tuple(_closed(cfg, alignment)))
    out.write(json.dumps(alignment_to_json(closed, include_origin=True), indent=2, ensure_ascii=False))
    return EXIT_OK


def run_validate(cfg: RunConfig, out: _Output) -> int:
    alignment = _load(cfg)
    for i, c in enumerate(alignment.correspondences, 1):
        kind = classify_pattern(c) if c.is_cross else "intra-" + c.source.side.value
        out.write(f"{i:3d}  {kind:<14} {c.confidence:.2f}  {c}")
    out.write(f"{len(alignment.correspondences)} correspondences OK")
    return EXIT_OK


def run_rewrite(cfg: RunConfig, query_file: Path, out: _Output) -> int:
    alignment = _load(cfg)
    d = build_dictionary(_closed(cfg, alignment))
    q = parse_select(query_file.read_text(encoding="utf-8"), alignment.prefixes)
    results = rewrite_query(q, d, strict=cfg.strict, prefixes=alignment.prefixes)
    if cfg.report:
        payload = [{"query": serialize_select(q2), "report": rep.to_json()} for q2, rep in results]
        out.write(json.dumps(payload, indent=2, ensure_ascii=False))
    else:
        out.write("\n".join(serialize_select(q2) for q2, _ in results).rstrip("\n"))
    for _, rep in results:
        for w in rep.warnings:
            _err(f"warning: {w}")
    return EXIT_OK


def run_ask(cfg: RunConfig, question: str, lexicon: Lexicon, out: _Output) -> int:
    alignment = _load(cfg)
    d = build_dictionary(_closed(cfg, alignment))
    q = normalize_question(question, lexicon)
    result = match_key(q, d, cfg.threshold, os.environ.get(MATCHER_ENV) or None)
    for w in result.warnings:
        _err(f"warning: {w}")
    source, targets = generate_query_pair(result.key, d)
    out.write(f"# key: {result.key}  (score {result.score:.3f}, {result.matcher} matcher)")
    out.write("# source query")
    out.write(serialize_select(source).rstrip("\n"))
    for k, (value, tq) in enumerate(zip(d[result.key], targets), 1):
        out.write(f"# target query {k}: {value.target}  (confidence {value.confidence:g}, {value.origin.value})")
        out.write(serialize_select(tq).rstrip("\n"))
    return EXIT_OK


def run_eval(cfg: RunConfig, n: int, out: _Output, source_facts=None, target_facts=None, dump=None) -> int:
    start = time.perf_counter()
    alignment = _load(cfg)
    closed = _closed(cfg, alignment)
    d = build_dictionary(closed)
    pair = generate_aligned_pair(closed, n, cfg.seed, alignment.prefixes)
    for w in pair.warnings:
        _err(f"warning: {w}")
    source, target = pair.source, pair.target
    if source_facts is not None:
        source = load_facts(source_facts, Side.SOURCE, alignment.prefixes)
    if target_facts is not None:
        target = load_facts(target_facts, Side.TARGET, alignment.prefixes)
    if dump is not None:
        dump.mkdir(parents=True, exist_ok=True)
        write_facts(source, dump / "source.facts")
        write_facts(target, dump / "target.facts")
    outcomes = run_oracle(d, source, target, alignment.prefixes)
    failed = [o for o in outcomes if not o.passed]
    for o in outcomes:
        status = "PASS" if o.passed else "FAIL"
        line = f"{status}  {o.correspondence}  [{o.source_rows} rows, {o.rewrites} rewrite(s)]"
        out.write(line)
        if o.detail:
            out.write(f"      {o.detail}")
    elapsed = time.perf_counter() - start
    out.write(
        f"{len(outcomes) - len(failed)}/{len(outcomes)} correspondences agree "
        f"(seed {cfg.seed}, n={n}, {len(source)} source / {len(target)} target facts, {elapsed:.2f}s)"
    )
    return EXIT_ORACLE if failed else EXIT_OK


def _probability(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alignment", type=Path, default=None, help="alignment JSON file (default: bundled fixture)")
    mode = common.add_mutually_exclusive_group()
    mode.add_argument("--strict", dest="strict", action="store_true", default=True, help="fail on unmapped source IRIs (default)")
    mode.add_argument("--lenient", dest="strict", action="store_false", help="keep unmapped source IRIs and report them")
    common.add_argument("--min-confidence", type=_probability, default=0.0, help="drop derived correspondences below this")
    common.add_argument("--invert", action="store_true", help="swap the roles of source and target")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--out", type=Path, default=None, help="write output here instead of stdout")

    parser = argparse.ArgumentParser(prog="alignrw", description="Rewrite SPARQL queries across aligned ontologies.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("closure", parents=[common], help="print asserted and derived correspondences")
    sub.add_parser("validate", parents=[common], help="check an alignment file")

    p = sub.add_parser("rewrite", parents=[common], help="rewrite a SELECT query")
    p.add_argument("query_file", type=Path)
    p.add_argument("--report", action="store_true", help="emit JSON with a rewrite report per query")

    p = sub.add_parser("ask", parents=[common], help="turn a question into a source/target query pair")
    p.add_argument("question")
    p.add_argument("--threshold", type=_probability, default=0.2)
    p.add_argument("--lexicon", type=Path, default=None, help="synonym groups, one tab-separated group per line")

    p = sub.add_parser("eval", parents=[common], help="check rewrites against generated aligned facts")
    p.add_argument("-n", "--instances", type=int, default=25, help="individuals per correspondence")
    p.add_argument("--source-facts", type=Path, default=None, help="use these source facts instead of generated ones")
    p.add_argument("--target-facts", type=Path, default=None, help="use these target facts instead of generated ones")
    p.add_argument("--dump-facts", type=Path, default=None, help="write the facts used to this directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(
            alignment=args.alignment or bundled(DEFAULT_ALIGNMENT),
            command=args.command,
            strict=args.strict,
            min_confidence=args.min_confidence,
            threshold=getattr(args, "threshold", 0.2),
            invert=args.invert,
            report=getattr(args, "report", False),
            seed=args.seed,
            out=args.out,
        )
    except ValueError as exc:
        _err(str(exc))
        return EXIT_INPUT
    out = _Output(cfg.out)
    try:
        if cfg.command == "closure":
            code = run_closure(cfg, out)
        elif cfg.command == "validate":
            code = run_validate(cfg, out)
        elif cfg.command == "rewrite":
            code = run_rewrite(cfg, args.query_file, out)
        elif cfg.command == "ask":
            lexicon = Lexicon.load(args.lexicon) if args.lexicon else Lexicon.bundled()
            code = run_ask(cfg, args.question, lexicon, out)
        else:
            if args.instances < 1:
                _err("--instances must be at least 1")
                return EXIT_INPUT
            code = run_eval(cfg, args.instances, out, args.source_facts, args.target_facts, args.dump_facts)
    except (AlignmentError, QuerySyntaxError, FactsError, OSError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    except UnmappedVocabularyError as exc:
        _err(str(exc))
        return EXIT_UNMAPPED
    except RewriteError as exc:
        _err(str(exc))
        return EXIT_INPUT
    except (NoConfidentMatch, EmptyQuestionError) as exc:
        _err(str(exc))
        return EXIT_NO_MATCH
    out.flush()
    return code


if __name__ == "__main__":
    sys.exit(main())

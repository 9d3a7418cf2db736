"""Command-line surface.

Every subcommand writes exactly one JSON document to stdout; logs and
error documents go to stderr.  Exit codes: 0 success, 1 validation
failure (grammar diagnostics, rejected prefix), 2 for I/O and format
errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import bench as bench_mod
from . import decode as decode_mod
from .earley import init
from .grammar import (
    GrammarError,
    load_catalog,
    parse_grammar,
    print_grammar,
    validate,
)
from .mask import MaskError, compute_mask
from .metrics import (
    MetricsError,
    bracketing_prf,
    check_validity,
    cie_prf,
    ed_accuracy,
    parse_bracket_tree,
    parse_triplets,
)
from .templates import (
    DEFAULT_CP_LABELS,
    CieSchema,
    CpInstance,
    EdInstance,
    TemplateError,
    build_cie_grammar,
    build_cp_grammar,
    build_ed_grammar,
)
from .vocab import VocabError, load_vocab

logging.basicConfig(stream=sys.stderr, level=logging.WARNING)


class CliError(Exception):
    def __init__(self, message: str, code: int = 2):
        super().__init__(message)
        self.code = code


def _emit(doc, pretty: bool) -> None:
    json.dump(doc, sys.stdout, indent=2 if pretty else None)
    sys.stdout.write("\n")


def _load_grammar(args):
    try:
        with open(args.grammar, "r", encoding="utf-8") as fh:
            grammar = parse_grammar(fh.read())
        for binding in args.catalog or ():
            name, _, path = binding.partition("=")
            if not path:
                raise CliError(f"--catalog expects name=path, got {binding!r}")
            grammar.bind(name, load_catalog(path, name=name))
    except (OSError, GrammarError) as exc:
        raise CliError(str(exc)) from exc
    return grammar


def _parse_prefix(raw: str) -> bytes:
    if raw.startswith("hex:"):
        try:
            return bytes.fromhex(raw[4:])
        except ValueError as exc:
            raise CliError(f"bad hex prefix: {exc}") from exc
    return raw.encode("utf-8")


def cmd_compile(args) -> int:
    grammar = _load_grammar(args)
    diags = validate(grammar)
    doc = {
        "ok": not diags,
        "diagnostics": [d._asdict() for d in diags],
        "nonterminals": len(grammar.nonterminals),
        "rules": len(grammar.rules),
    }
    if args.check:
        reparsed = parse_grammar(print_grammar(grammar))
        doc["roundtrip"] = grammar.structurally_equal(reparsed)
    _emit(doc, args.pretty)
    return 0 if not diags else 1


def cmd_mask(args) -> int:
    grammar = _load_grammar(args)
    try:
        vocab = load_vocab(args.vocab)
    except (OSError, VocabError) as exc:
        raise CliError(str(exc)) from exc
    state = init(grammar)
    prefix = _parse_prefix(args.prefix_bytes)
    for i, byte in enumerate(prefix):
        state = state.advance(byte)
        if not state.is_viable():
            raise CliError(f"prefix rejected at byte offset {i}", code=1)
    mask = compute_mask(state, vocab)
    _emit({"allowed": mask.ids(), "eos": mask.eos_allowed}, args.pretty)
    return 0


def _build_scorer(spec: str, n: int):
    if spec == "uniform":
        return decode_mod.uniform_scorer(n)
    kind, _, arg = spec.partition(":")
    try:
        if kind == "replay":
            return decode_mod.replay_scorer(arg)
        if kind == "bigram":
            return decode_mod.ngram_scorer(arg)
        if kind == "random":
            return decode_mod.RandomScorer(n, seed=int(arg or "0"))
    except (OSError, decode_mod.DecodeError, ValueError) as exc:
        raise CliError(str(exc)) from exc
    raise CliError(f"unknown scorer {spec!r}")


def _instance_grammar(args):
    try:
        with open(args.instance, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"instance: {exc}") from exc
    try:
        if args.task == "cie":
            markers = tuple(
                m.encode("utf-8") for m in doc.get("markers", ["[s] ", " [r] ", " [o] "])
            )
            schema = CieSchema(
                entity_catalog=load_catalog(doc["entities"], name="entities"),
                relation_catalog=load_catalog(doc["relations"], name="relations"),
                markers=markers,
            )
            return build_cie_grammar(schema)
        if args.task == "ed":
            inst = EdInstance.from_json(doc)
            if inst.candidates:
                return build_ed_grammar(inst, mode="idg")
            if not doc.get("kb"):
                raise CliError("ED instance without candidates needs a \"kb\" catalog path")
            return build_ed_grammar(
                inst, mode="iig", kb=load_catalog(doc["kb"], name="kb")
            )
        if args.task == "cp":
            return build_cp_grammar(CpInstance.from_json(doc))
        if args.task == "raw":
            with open(doc["grammar"], encoding="utf-8") as fh:
                grammar = parse_grammar(fh.read())
            for name, path in doc.get("catalogs", {}).items():
                grammar.bind(name, load_catalog(path, name=name))
            return grammar
    except (OSError, KeyError, GrammarError, TemplateError) as exc:
        raise CliError(f"instance: {exc}") from exc
    raise CliError(f"unknown task {args.task!r}")


def cmd_decode(args) -> int:
    grammar = _instance_grammar(args)
    diags = validate(grammar)
    if diags:
        raise CliError("; ".join(str(d) for d in diags), code=1)
    try:
        vocab = load_vocab(args.vocab)
    except (OSError, VocabError) as exc:
        raise CliError(str(exc)) from exc
    scorer = _build_scorer(args.scorer, len(vocab))
    config = decode_mod.DecodeConfig(
        beam_size=args.beam,
        max_tokens=args.max_tokens,
        alpha=args.alpha,
        select_nonempty=not args.allow_empty,
    )
    try:
        ranked = decode_mod.constrained_beam(scorer, grammar, vocab, config)
    except decode_mod.DecodeError as exc:
        raise CliError(str(exc)) from exc
    report = decode_mod.empty_string_report(ranked, vocab.eos_id)
    doc = {
        "hypotheses": [
            {
                "ids": list(h.ids),
                "text": h.text(vocab).decode("utf-8", errors="replace"),
                "logprob_sum": h.logprob_sum,
                "score": decode_mod.length_normalized_score(h, args.alpha),
                "finished": h.finished,
            }
            for h in ranked
        ],
        "empty_string_report": {
            "top_is_empty": report.top_is_empty,
            "alpha_star": report.alpha_star,
        },
    }
    _emit(doc, args.pretty)
    return 0


def _read_jsonl(path) -> list:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"{path}: {exc}") from exc


def cmd_eval(args) -> int:
    pred = _read_jsonl(args.pred)
    gold = _read_jsonl(args.gold)
    try:
        if args.task == "cie":
            p, r, f1 = cie_prf(
                [parse_triplets(x) for x in pred], [parse_triplets(x) for x in gold]
            )
            doc = {"p": p, "r": r, "f1": f1}
        elif args.task == "ed":
            doc = {"accuracy": ed_accuracy(pred, gold)}
        elif args.task == "cp":
            labels = DEFAULT_CP_LABELS
            if args.labels:
                labels = tuple(open(args.labels, encoding="utf-8").read().split())
            scores = []
            valid = 0
            for p_str, g_str in zip(pred, gold):
                gold_tree = parse_bracket_tree(g_str)
                if args.validity:
                    result = check_validity(p_str, gold_tree.leaves(), labels)
                    valid += 1 if result.valid else 0
                try:
                    scores.append(bracketing_prf(parse_bracket_tree(p_str), gold_tree))
                except MetricsError:
                    scores.append(None)
            usable = [s for s in scores if s is not None]
            doc = {
                "p": sum(s.precision for s in usable) / len(scores) if scores else 0.0,
                "r": sum(s.recall for s in usable) / len(scores) if scores else 0.0,
                "f1": sum(s.f1 for s in usable) / len(scores) if scores else 0.0,
            }
            if args.validity:
                doc["validity"] = 100.0 * valid / len(pred) if pred else 0.0
        else:
            raise CliError(f"unknown task {args.task!r}")
    except MetricsError as exc:
        raise CliError(str(exc)) from exc
    _emit(doc, args.pretty)
    return 0


def cmd_bench(args) -> int:
    grammar = _load_grammar(args)
    diags = validate(grammar)
    if diags:
        raise CliError("; ".join(str(d) for d in diags), code=1)
    try:
        vocab = load_vocab(args.vocab)
    except (OSError, VocabError) as exc:
        raise CliError(str(exc)) from exc
    report = bench_mod.measure_overhead(
        grammar, vocab, steps=args.steps, seed=args.seed, label=args.grammar
    )
    _emit(report.__dict__, args.pretty)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gcdkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--pretty", action="store_true", help="indent JSON output")

    p = sub.add_parser("compile", help="parse, bind catalogs, validate")
    p.add_argument("--grammar", required=True)
    p.add_argument("--catalog", action="append", metavar="NAME=PATH")
    p.add_argument("--check", action="store_true", help="also verify print/parse round-trip")
    common(p)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("mask", help="allowed token ids after a byte prefix")
    p.add_argument("--grammar", required=True)
    p.add_argument("--catalog", action="append", metavar="NAME=PATH")
    p.add_argument("--vocab", required=True)
    p.add_argument("--prefix-bytes", default="", help="UTF-8 text, or hex:<digits>")
    common(p)
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("decode", help="constrained beam decode with a test scorer")
    p.add_argument("--task", required=True, choices=["cie", "ed", "cp", "raw"])
    p.add_argument("--instance", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--scorer", default="uniform", help="uniform | replay:PATH | bigram:PATH | random:SEED")
    p.add_argument("--beam", type=int, default=2)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--max-tokens", type=int, default=256)
    p.add_argument("--allow-empty", action="store_true")
    common(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="score prediction files against gold")
    p.add_argument("--task", required=True, choices=["cie", "ed", "cp"])
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--validity", action="store_true")
    p.add_argument("--labels", help="whitespace-separated label file for cp validity")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="mask overhead over a random admissible walk")
    p.add_argument("--grammar", required=True)
    p.add_argument("--catalog", action="append", metavar="NAME=PATH")
    p.add_argument("--vocab", required=True)
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return exc.code
    except (GrammarError, VocabError, MaskError, MetricsError, TemplateError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())

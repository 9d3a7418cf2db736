"""Task evaluation: triplet-set micro P/R/F1, entity accuracy, bracket
tree scoring, and the three-constraint bracketing validity check."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from .templates import CieSchema


class MetricsError(Exception):
    pass


Triplet = tuple[str, str, str]


def _as_text(value) -> str:
    return value.decode("utf-8") if isinstance(value, (bytes, bytearray)) else value


# ---------------------------------------------------------------------------
# Triplet linearization
# ---------------------------------------------------------------------------


def linearize_triplets(triplets: Sequence[Triplet], schema: CieSchema | None = None) -> str:
    """Render triplets in marker form, space-joined, deduplicating order-stably."""
    ms, mr, mo = (
        schema.markers if schema is not None else (b"[s] ", b" [r] ", b" [o] ")
    )
    ms, mr, mo = ms.decode(), mr.decode(), mo.decode()
    seen = set()
    parts = []
    for t in triplets:
        t = tuple(_as_text(x) for x in t)
        if t in seen:
            continue
        seen.add(t)
        parts.append(f"{ms}{t[0]}{mr}{t[1]}{mo}{t[2]}")
    return " ".join(parts)


def parse_triplets(linearized, schema: CieSchema | None = None) -> frozenset:
    """Inverse of :func:`linearize_triplets` with set semantics.

    Whitespace around the markers is flexible.  Malformed marker
    sequences raise with the byte offset of the first offending marker.
    """
    text = _as_text(linearized)
    if schema is not None:
        cores = [m.decode().strip() for m in schema.markers]
    else:
        cores = ["[s]", "[r]", "[o]"]
    if len(set(cores)) != 3 or any(not c for c in cores):
        raise MetricsError("markers must have distinct non-whitespace cores")
    if not text.strip():
        return frozenset()
    pattern = re.compile("|".join(re.escape(c) for c in cores))
    hits = list(pattern.finditer(text))
    if not hits:
        raise MetricsError("offset 0: no triplet markers found")
    if text[: hits[0].start()].strip():
        raise MetricsError("offset 0: text before first subject marker")
    expected_cycle = [cores[0], cores[1], cores[2]]
    triplets = set()
    fields: list[str] = []
    for k, hit in enumerate(hits):
        want = expected_cycle[k % 3]
        if hit.group(0) != want:
            raise MetricsError(f"offset {hit.start()}: expected {want}, found {hit.group(0)}")
        end = hits[k + 1].start() if k + 1 < len(hits) else len(text)
        fields.append(text[hit.end() : end].strip())
        if k % 3 == 2:
            triplets.add((fields[0], fields[1], fields[2]))
            fields = []
    if fields:
        raise MetricsError(
            f"offset {hits[-1].start()}: truncated triplet (got {len(fields)} of 3 fields)"
        )
    return frozenset(triplets)


def cie_prf(pred: Sequence[Iterable], gold: Sequence[Iterable]) -> tuple[float, float, float]:
    """Corpus-level micro precision/recall/F1 over exact-match triplets.

    A 0/0 ratio counts as 1.0 only when both sides are empty corpus-wide,
    otherwise 0.0.
    """
    if len(pred) != len(gold):
        raise MetricsError(f"length mismatch: {len(pred)} predictions vs {len(gold)} gold")
    tp = n_pred = n_gold = 0
    for p, g in zip(pred, gold):
        ps, gs = frozenset(p), frozenset(g)
        tp += len(ps & gs)
        n_pred += len(ps)
        n_gold += len(gs)
    both_empty = n_pred == 0 and n_gold == 0
    precision = tp / n_pred if n_pred else (1.0 if both_empty else 0.0)
    recall = tp / n_gold if n_gold else (1.0 if both_empty else 0.0)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def ed_accuracy(pred: Sequence, gold: Sequence) -> float:
    """Fraction of exact matches; with one entity per mention this equals
    micro precision, recall, and F1."""
    if len(pred) != len(gold):
        raise MetricsError(f"length mismatch: {len(pred)} predictions vs {len(gold)} gold")
    if not gold:
        raise MetricsError("accuracy undefined on empty input")
    hits = sum(1 for p, g in zip(pred, gold) if _as_text(p) == _as_text(g))
    return hits / len(gold)


# ---------------------------------------------------------------------------
# Bracket trees
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BracketTree:
    """Labeled ordered tree; children are BracketTree nodes or leaf words."""

    label: str
    children: tuple

    def leaves(self) -> list[str]:
        out = []
        for child in self.children:
            if isinstance(child, BracketTree):
                out.extend(child.leaves())
            else:
                out.append(child)
        return out

    def internal_nodes(self) -> int:
        return 1 + sum(
            c.internal_nodes() for c in self.children if isinstance(c, BracketTree)
        )


_BRACKET_TOKEN = re.compile(r"[\[\]()]|[^\s\[\]()]+")


def parse_bracket_tree(s) -> BracketTree:
    """Parse ``[S [NP x]]`` or ``( S ( NP x ) )`` style bracket strings."""
    text = _as_text(s)
    tokens = _BRACKET_TOKEN.findall(text)
    pos = 0

    def parse_node() -> BracketTree:
        nonlocal pos
        pos += 1  # opening bracket
        if pos >= len(tokens) or tokens[pos] in "[]()":
            raise MetricsError("missing label after open bracket")
        label = tokens[pos]
        pos += 1
        children: list = []
        while True:
            if pos >= len(tokens):
                raise MetricsError("unbalanced: unexpected end of input")
            tok = tokens[pos]
            if tok in "])":
                pos += 1
                if not children:
                    raise MetricsError(f"empty constituent {label!r}")
                return BracketTree(label=label, children=tuple(children))
            if tok in "[(":
                children.append(parse_node())
            else:
                children.append(tok)
                pos += 1

    if not tokens or tokens[0] not in "[(":
        raise MetricsError("expected an opening bracket")
    tree = parse_node()
    if pos != len(tokens):
        raise MetricsError(f"unbalanced: trailing content after root at token {pos}")
    return tree


class ValidityResult(NamedTuple):
    valid: bool
    failures: frozenset  # subset of {"completeness", "balance", "label-consistency"}


def check_validity(s, words: Sequence, labels: Iterable[str]) -> ValidityResult:
    """Evaluate the three bracketing constraints on a raw output string.

    completeness: the word tokens are exactly ``words`` in order;
    balance: every close matches an earlier open and all opens close;
    label-consistency: every open bracket is immediately followed by a
    label from ``labels``.
    """
    text = _as_text(s)
    want_words = [_as_text(w) for w in words]
    label_set = {_as_text(l) for l in labels}
    tokens = _BRACKET_TOKEN.findall(text)
    failures = set()
    depth = 0
    seen_words = []
    expect_label = False
    for tok in tokens:
        if tok in "[(":
            depth += 1
            expect_label = True
        elif tok in "])":
            if expect_label:
                failures.add("label-consistency")
                expect_label = False
            depth -= 1
            if depth < 0:
                failures.add("balance")
                depth = 0
        elif expect_label:
            if tok not in label_set:
                failures.add("label-consistency")
            expect_label = False
        else:
            seen_words.append(tok)
    if expect_label:
        failures.add("label-consistency")
    if depth != 0:
        failures.add("balance")
    if seen_words != want_words:
        failures.add("completeness")
    return ValidityResult(valid=not failures, failures=frozenset(failures))


class BracketScore(NamedTuple):
    precision: float
    recall: float
    f1: float
    leaf_mismatch: bool = False


def _spans(tree: BracketTree, start: int, acc: Counter, exclude_preterminals: bool) -> int:
    end = start
    is_preterminal = len(tree.children) == 1 and not isinstance(
        tree.children[0], BracketTree
    )
    for child in tree.children:
        if isinstance(child, BracketTree):
            end = _spans(child, end, acc, exclude_preterminals)
        else:
            end += 1
    if not (exclude_preterminals and is_preterminal):
        acc[(tree.label, start, end)] += 1
    return end


def bracket_spans(tree: BracketTree, exclude_preterminals: bool = False) -> Counter:
    """Multiset of (label, start, end) spans over internal nodes."""
    acc: Counter = Counter()
    _spans(tree, 0, acc, exclude_preterminals)
    return acc


def bracketing_prf(
    pred: BracketTree, gold: BracketTree, exclude_preterminals: bool = False
) -> BracketScore:
    """EVALB-style span comparison.

    By default every labeled internal node counts, width-1 spans
    included; ``exclude_preterminals`` drops part-of-speech nodes (one
    leaf child) to mirror the classic EVALB setting.  Trees over
    different leaf sequences score zero with ``leaf_mismatch`` set.
    """
    if pred.leaves() != gold.leaves():
        return BracketScore(0.0, 0.0, 0.0, leaf_mismatch=True)
    ps = bracket_spans(pred, exclude_preterminals)
    gs = bracket_spans(gold, exclude_preterminals)
    match = sum((ps & gs).values())
    n_pred = sum(ps.values())
    n_gold = sum(gs.values())
    precision = match / n_pred if n_pred else 0.0
    recall = match / n_gold if n_gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return BracketScore(precision, recall, f1)


def strip_function_tags(tree: BracketTree) -> BracketTree:
    """Compare NP-SBJ as NP: drop label suffixes after the first dash."""
    label = tree.label.split("-")[0] or tree.label
    children = tuple(
        strip_function_tags(c) if isinstance(c, BracketTree) else c
        for c in tree.children
    )
    return BracketTree(label=label, children=children)

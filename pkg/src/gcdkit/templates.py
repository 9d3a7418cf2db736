"""Task grammar builders: triplet extraction, entity disambiguation,
constituency parsing, plus the input-independent ablation variants.

Whitespace conventions are fixed here and documented per builder; the
evaluation parsers tolerate flexible whitespace when reading outputs
back.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

from .grammar import Catalog, Grammar, LexSet, Nonterminal, Rule, Terminal


class TemplateError(Exception):
    pass


def _as_bytes(value) -> bytes:
    return value.encode("utf-8") if isinstance(value, str) else bytes(value)


# ---------------------------------------------------------------------------
# Closed information extraction
# ---------------------------------------------------------------------------

DEFAULT_MARKERS = (b"[s] ", b" [r] ", b" [o] ")


@dataclass(frozen=True)
class CieSchema:
    """Entity/relation catalogs plus the subject/relation/object markers."""

    entity_catalog: Catalog
    relation_catalog: Catalog
    markers: tuple[bytes, bytes, bytes] = DEFAULT_MARKERS

    def __post_init__(self):
        ms, mr, mo = self.markers
        if not (ms and mr and mo) or len({ms, mr, mo}) != 3:
            raise TemplateError("markers must be non-empty and pairwise distinct")


def build_cie_grammar(schema: CieSchema) -> Grammar:
    """Grammar of zero or more space-joined triplets.

    Each triplet reads ``<ms>entity<mr>relation<mo>entity`` with the
    schema's markers; consecutive triplets are joined by a single space.
    The empty string is a member (zero triplets).  Building fails if any
    catalog entry contains a marker substring, since that would make the
    linearization ambiguous to parse back.
    """
    ms, mr, mo = schema.markers
    for cat in (schema.entity_catalog, schema.relation_catalog):
        for entry in cat.entries:
            for marker in schema.markers:
                if marker in entry:
                    raise TemplateError(
                        f"catalog {cat.name!r} entry {entry!r} contains marker {marker!r}"
                    )
    rules = (
        Rule("CIE", (Terminal(b""),)),
        Rule("CIE", (Nonterminal("TRIPLET"), Nonterminal("TAIL"))),
        Rule("TAIL", (Terminal(b""),)),
        Rule("TAIL", (Terminal(b" "), Nonterminal("TRIPLET"), Nonterminal("TAIL"))),
        Rule(
            "TRIPLET",
            (
                Terminal(ms),
                LexSet("entities"),
                Terminal(mr),
                LexSet("relations"),
                Terminal(mo),
                LexSet("entities"),
            ),
        ),
    )
    return Grammar(
        start="CIE",
        rules=rules,
        lexsets={
            "entities": schema.entity_catalog,
            "relations": schema.relation_catalog,
        },
    )


# ---------------------------------------------------------------------------
# Entity disambiguation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EdInstance:
    """One mention with its context and candidate entity names.

    ``ent_open``/``ent_close`` demarcate the mention in the source text;
    the generated surface uses ``bracket_open``/``bracket_close`` around
    the predicted entity name.
    """

    left_context: bytes
    mention: bytes
    candidates: tuple[bytes, ...] = ()
    ent_open: bytes = b"<ent>"
    ent_close: bytes = b"</ent>"
    bracket_open: bytes = b"["
    bracket_close: bytes = b"]"

    def __post_init__(self):
        if not self.mention:
            raise TemplateError("mention must be non-empty")

    @classmethod
    def from_json(cls, doc: dict) -> "EdInstance":
        return cls(
            left_context=_as_bytes(doc.get("left", "")),
            mention=_as_bytes(doc["mention"]),
            candidates=tuple(_as_bytes(c) for c in doc.get("candidates", ())),
        )


def build_ed_grammar(inst: EdInstance, mode: str = "idg", kb: Catalog | None = None) -> Grammar:
    """Grammar of ``left_context + mention + " [" + entity + "]"``.

    In ``idg`` mode the entity slot ranges over the instance candidates;
    in ``iig`` mode it ranges over the full ``kb`` catalog.  Repeating
    the left context is part of the language so a decoder is forced to
    reproduce it verbatim before committing to an entity.
    """
    prefix = inst.left_context + inst.mention + b" " + inst.bracket_open
    head = (Terminal(prefix),) if prefix else ()
    rules = [Rule("ED", head + (Nonterminal("CAND"), Terminal(inst.bracket_close)))]
    lexsets = {}
    if mode == "idg":
        if not inst.candidates:
            raise TemplateError("IDG mode requires a non-empty candidate set")
        for cand in inst.candidates:
            rules.append(Rule("CAND", (Terminal(cand),)))
    elif mode == "iig":
        if kb is None:
            raise TemplateError("IIG mode requires a knowledge-base catalog")
        rules.append(Rule("CAND", (LexSet("kb"),)))
        lexsets["kb"] = kb
    else:
        raise TemplateError(f"unknown mode {mode!r}")
    return Grammar(start="ED", rules=tuple(rules), lexsets=lexsets)


def extract_ed_entity(output: bytes, inst: EdInstance) -> bytes:
    """Entity name between the brackets of a decoded ED surface string."""
    lo = output.rfind(b" " + inst.bracket_open)
    hi = output.rfind(inst.bracket_close)
    if lo < 0 or hi <= lo:
        raise TemplateError(f"no bracketed entity in {output!r}")
    return output[lo + 1 + len(inst.bracket_open) : hi]


# ---------------------------------------------------------------------------
# Constituency parsing
# ---------------------------------------------------------------------------

# Penn Treebank labels without function tags: clause and phrase levels
# plus part-of-speech tags.
DEFAULT_CP_LABELS = (
    "S", "SBAR", "SBARQ", "SINV", "SQ",
    "ADJP", "ADVP", "CONJP", "FRAG", "INTJ", "LST", "NAC", "NP", "NX",
    "PP", "PRN", "PRT", "QP", "RRC", "UCP", "VP",
    "WHADJP", "WHADVP", "WHNP", "WHPP", "X",
    "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD",
    "NN", "NNS", "NNP", "NNPS", "PDT", "POS", "PRP", "PRP$",
    "RB", "RBR", "RBS", "RP", "SYM", "TO", "UH",
    "VB", "VBD", "VBG", "VBN", "VBP", "VBZ", "WDT", "WP", "WP$", "WRB",
)

DEFAULT_FUNCTION_TAGS = (
    "SBJ", "PRD", "TMP", "LOC", "CLR", "ADV", "DIR", "MNR", "NOM", "TPC", "PRP",
)


def expand_labels(labels: Iterable[str], suffixes: Iterable[str] = DEFAULT_FUNCTION_TAGS):
    """Add dash-suffixed function-tag variants (e.g. NP -> NP-SBJ)."""
    base = list(labels)
    out = list(base)
    for label in base:
        for suffix in suffixes:
            out.append(f"{label}-{suffix}")
    return tuple(out)


@dataclass(frozen=True)
class CpInstance:
    words: tuple[bytes, ...]
    labels: tuple[str, ...] = DEFAULT_CP_LABELS
    max_open: int = 0  # 0 means the default bound 2n + 2

    def __post_init__(self):
        if not self.words:
            raise TemplateError("need at least one word")
        if not self.labels:
            raise TemplateError("label set must be non-empty")
        if self.max_open == 0:
            object.__setattr__(self, "max_open", 2 * len(self.words) + 2)
        if self.max_open < len(self.words):
            raise TemplateError("max_open must be at least the word count")

    @classmethod
    def from_json(cls, doc: dict) -> "CpInstance":
        words = tuple(_as_bytes(w) for w in doc["words"])
        labels = tuple(doc.get("labels") or DEFAULT_CP_LABELS)
        return cls(words=words, labels=labels, max_open=int(doc.get("max_open", 0)))


# Bracketing state machine contexts: just opened a bracket (label was the
# last emission), after a word, after a closing bracket.  The context
# decides whether a following "[" takes a leading space and whether "]"
# may close immediately (empty constituents are not Penn Treebank trees,
# so a bracket must contain at least one word or subtree).
_OPENED, _WORD, _CLOSED = "o", "w", "c"


def build_cp_grammar(inst: CpInstance) -> Grammar:
    """Counting grammar over the instance words.

    Members are exactly the bracketings that (a) contain every input
    word once, in order, (b) keep brackets balanced with the open count
    never exceeding ``max_open`` and returning to zero only at the end,
    and (c) label every bracket from the instance label set.  Surface
    convention: ``[`` is glued to its label, every word takes one
    leading space, ``]`` attaches directly, and a child ``[`` following
    a label or word takes one leading space.
    """
    n = len(inst.words)
    cap = inst.max_open

    def live_key(i, j, s):
        return (i, j, s)

    # Backward fixpoint: states from which a completed bracketing is
    # reachable.  Transitions mirror rule emission below.
    live: set = set()
    changed = True
    while changed:
        changed = False
        for i in range(n + 1):
            for j in range(cap + 1):
                for s in (_OPENED, _WORD, _CLOSED):
                    key = live_key(i, j, s)
                    if key in live:
                        continue
                    ok = False
                    if j == 1 and i == n and s != _OPENED:
                        ok = True  # final close
                    if not ok and j < cap and (j >= 1 or i == 0) and live_key(i, j + 1, _OPENED) in live:
                        ok = True
                    if not ok and i < n and j >= 1 and live_key(i + 1, j, _WORD) in live:
                        ok = True
                    if not ok and j >= 2 and s != _OPENED and live_key(i, j - 1, _CLOSED) in live:
                        ok = True
                    if ok:
                        live.add(key)
                        changed = True

    start_key = live_key(0, 0, _CLOSED)
    if start_key not in live:
        raise TemplateError("no valid bracketing exists for this instance")

    def name(key):
        i, j, s = key
        return f"B_{i}_{j}_{s}"

    rules: list[Rule] = [Rule("CP", (Nonterminal(name(start_key)),))]
    seen = {start_key}
    frontier = [start_key]
    while frontier:
        key = frontier.pop()
        i, j, s = key
        lhs = name(key)

        def goto(nkey, *prefix_items):
            if nkey in live:
                rules.append(Rule(lhs, tuple(prefix_items) + (Nonterminal(name(nkey)),)))
                if nkey not in seen:
                    seen.add(nkey)
                    frontier.append(nkey)

        if j < cap and (j >= 1 or i == 0):
            opener = b"[" if s == _CLOSED else b" ["
            goto(live_key(i, j + 1, _OPENED), Terminal(opener), LexSet("labels"))
        if i < n and j >= 1:
            goto(live_key(i + 1, j, _WORD), Terminal(b" " + inst.words[i]))
        if j >= 2 and s != _OPENED:
            goto(live_key(i, j - 1, _CLOSED), Terminal(b"]"))
        if j == 1 and i == n and s != _OPENED:
            rules.append(Rule(lhs, (Terminal(b"]"),)))

    labels_cat = Catalog("labels", [l.encode("utf-8") for l in inst.labels])
    return Grammar(start="CP", rules=tuple(rules), lexsets={"labels": labels_cat})


def build_cp_iig_grammar(labels: Iterable[str], anonymized: bytes = b"XX") -> Grammar:
    """Input-independent ablation: balanced label-consistent trees of any
    size over a single anonymized terminal.  Satisfies balance and label
    consistency but cannot enforce completeness for any given sentence.
    """
    labels = tuple(labels)
    if not labels:
        raise TemplateError("label set must be non-empty")
    word = Terminal(b" " + _as_bytes(anonymized))
    close = Terminal(b"]")
    rules = (
        Rule("CPIIG", (Nonterminal("T_c"),)),
        Rule("T_c", (Terminal(b"["), LexSet("labels"), Nonterminal("A"))),
        Rule("T_a", (Terminal(b" ["), LexSet("labels"), Nonterminal("A"))),
        Rule("A", (word, Nonterminal("W"))),
        Rule("A", (Nonterminal("T_a"), Nonterminal("C"))),
        Rule("W", (close,)),
        Rule("W", (word, Nonterminal("W"))),
        Rule("W", (Nonterminal("T_a"), Nonterminal("C"))),
        Rule("C", (close,)),
        Rule("C", (word, Nonterminal("W"))),
        Rule("C", (Nonterminal("T_c"), Nonterminal("C"))),
    )
    labels_cat = Catalog("labels", [l.encode("utf-8") for l in labels])
    return Grammar(start="CPIIG", rules=rules, lexsets={"labels": labels_cat})


def load_instance(path, task: str):
    """Read a task instance JSON document from disk."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if task == "ed":
        return EdInstance.from_json(doc)
    if task == "cp":
        return CpInstance.from_json(doc)
    raise TemplateError(f"unknown instance task {task!r}")

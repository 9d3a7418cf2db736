"""Context-free grammar model, the ``.gcd`` text format, and lexical catalogs.

Grammars are byte-level: terminals are byte strings, so tokenizer
vocabularies (which are byte-defined) compose without a normalization
layer.  Large lexical alternations (entity or relation inventories) are
not encoded as one rule per entry; a rule references a named lexical set
(``@name``) backed by a :class:`Catalog`, and the recognizer matches
entries through the catalog's prefix trie.
"""

from __future__ import annotations

import logging
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Union

logger = logging.getLogger(__name__)

# Atom sequences: byte grammars use bytes, token-level grammars use
# tuples of token ids.  Both index to ints and compare lexicographically.
Atoms = Union[bytes, tuple]


class GrammarError(Exception):
    """Base error for grammar construction problems."""


class GrammarSyntaxError(GrammarError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class CatalogError(GrammarError):
    pass


@dataclass(frozen=True)
class Terminal:
    """Literal atom sequence; zero atoms means epsilon."""

    value: Atoms

    def __repr__(self):
        return f"Terminal({self.value!r})"


@dataclass(frozen=True)
class Nonterminal:
    name: str


@dataclass(frozen=True)
class LexSet:
    """Reference to a named catalog of alternative atom sequences."""

    name: str


RhsItem = Union[Terminal, Nonterminal, LexSet]


@dataclass(frozen=True)
class Rule:
    lhs: str
    rhs: tuple[RhsItem, ...]

    def __post_init__(self):
        if not self.rhs:
            # Normalized form: an empty right-hand side is a single
            # epsilon terminal, never a zero-item sequence.
            object.__setattr__(self, "rhs", (Terminal(b""),))


class Cursor(NamedTuple):
    """Position inside a catalog trie: the slice of sorted entries
    matching the consumed prefix, plus the prefix depth."""

    lo: int
    hi: int
    depth: int


def _extend(prefix: Atoms, atom: int) -> Atoms:
    return prefix + bytes([atom]) if isinstance(prefix, bytes) else prefix + (atom,)


def _upper_bound(probe: Atoms):
    """Smallest sequence greater than every extension of ``probe``."""
    if isinstance(probe, tuple):
        return probe[:-1] + (probe[-1] + 1,)
    i = len(probe) - 1
    while i >= 0 and probe[i] == 0xFF:
        i -= 1
    if i < 0:
        return None
    return probe[:i] + bytes([probe[i] + 1])


class Catalog:
    """Immutable set of non-empty atom sequences with prefix-trie access.

    The trie is realized over the sorted entry array: a cursor is the
    contiguous range of entries sharing the consumed prefix.  Stepping a
    cursor is a pair of binary searches over whole entries (C-speed
    comparisons), so memory stays one pointer per entry regardless of
    entry length.
    """

    def __init__(self, name: str, entries: Iterable[Atoms], skipped_empty: int = 0):
        self.name = name
        uniq = set(entries)
        if any(len(e) == 0 for e in uniq):
            raise CatalogError(f"catalog {name!r}: empty entries are not allowed")
        self.entries: frozenset = frozenset(uniq)
        self._sorted: list = sorted(uniq)
        self.skipped_empty = skipped_empty

    def __len__(self):
        return len(self._sorted)

    def __contains__(self, item: Atoms) -> bool:
        return item in self.entries

    def __repr__(self):
        return f"Catalog({self.name!r}, {len(self)} entries)"

    # -- trie cursor interface -------------------------------------------

    def root(self) -> Cursor:
        return Cursor(0, len(self._sorted), 0)

    def accepting(self, cur: Cursor) -> bool:
        """True if the consumed prefix is itself an entry."""
        return cur.lo < cur.hi and len(self._sorted[cur.lo]) == cur.depth

    def can_extend(self, cur: Cursor) -> bool:
        """True if some entry strictly extends the consumed prefix."""
        return cur.hi - cur.lo > (1 if self.accepting(cur) else 0)

    def step(self, cur: Cursor, atom: int) -> Cursor | None:
        """Advance the cursor by one atom; None when no entry continues."""
        lo = cur.lo + 1 if self.accepting(cur) else cur.lo
        if lo >= cur.hi:
            return None
        ents = self._sorted
        probe = _extend(ents[lo][: cur.depth], atom)
        lo2 = bisect_left(ents, probe, lo, cur.hi)
        up = _upper_bound(probe)
        hi2 = bisect_left(ents, up, lo2, cur.hi) if up is not None else cur.hi
        if lo2 == hi2:
            return None
        return Cursor(lo2, hi2, cur.depth + 1)

    def next_atoms(self, cur: Cursor) -> list[int]:
        """Distinct atoms that extend the cursor, in ascending order."""
        lo = cur.lo + 1 if self.accepting(cur) else cur.lo
        d = cur.depth
        ents = self._sorted
        out = []
        while lo < cur.hi:
            atom = ents[lo][d]
            out.append(atom)
            up = _upper_bound(_extend(ents[lo][:d], atom))
            lo = bisect_left(ents, up, lo, cur.hi) if up is not None else cur.hi
        return out


def load_catalog(path, name: str | None = None) -> Catalog:
    """Load a catalog file: UTF-8, one entry per line, LF endings.

    Duplicate lines collapse; empty lines are skipped and counted.
    """
    path = str(path)
    if name is None:
        name = path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
    entries = set()
    skipped = 0
    with open(path, "rb") as fh:
        for raw in fh:
            line = raw.rstrip(b"\n")
            if not line:
                skipped += 1
                continue
            entries.add(line)
    if skipped:
        logger.warning("catalog %s: skipped %d empty line(s)", path, skipped)
    return Catalog(name, entries, skipped_empty=skipped)


@dataclass
class Grammar:
    """A CFG over byte (or token-id) atoms.

    ``lexsets`` maps every referenced lexical-set name to its catalog;
    the binding may be filled in after parsing via :meth:`bind`.  After
    construction plus binding the object is treated as immutable and is
    safe to share across threads.
    """

    start: str
    rules: tuple[Rule, ...]
    lexsets: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rules = tuple(self.rules)
        referenced = {i.name for r in self.rules for i in r.rhs if isinstance(i, LexSet)}
        for name in referenced:
            self.lexsets.setdefault(name, None)

    @property
    def nonterminals(self) -> frozenset:
        names = {r.lhs for r in self.rules}
        names.add(self.start)
        for r in self.rules:
            names.update(i.name for i in r.rhs if isinstance(i, Nonterminal))
        return frozenset(names)

    def rules_for(self, name: str) -> list[Rule]:
        return [r for r in self.rules if r.lhs == name]

    def bind(self, name: str, catalog: Catalog) -> None:
        """Attach a catalog to a referenced lexset name (setup phase only)."""
        if name not in self.lexsets:
            raise GrammarError(f"grammar references no lexset named {name!r}")
        self.lexsets[name] = catalog
        self.__dict__.pop("_compiled", None)

    def catalog(self, name: str) -> Catalog:
        cat = self.lexsets.get(name)
        if cat is None:
            raise GrammarError(f"lexset {name!r} is not bound to a catalog")
        return cat

    def structurally_equal(self, other: "Grammar") -> bool:
        """Same start, same rule sequence, same lexset names (bindings ignored)."""
        return (
            self.start == other.start
            and self.rules == other.rules
            and set(self.lexsets) == set(other.lexsets)
        )


class Diagnostic(NamedTuple):
    code: str
    subject: str
    message: str

    def __str__(self):
        return f"{self.code}: {self.message}"


def validate(grammar: Grammar) -> list[Diagnostic]:
    """Check grammar well-formedness; an empty list means valid.

    Reported violations: nonterminals used without any rule, symbols
    unreachable from the start symbol, lexset references without a bound
    catalog, and nonterminals with no terminating derivation (e.g.
    ``S ::= S``), which could never complete a parse.
    """
    diags: list[Diagnostic] = []
    defined = {r.lhs for r in grammar.rules}
    referenced = {grammar.start}
    for r in grammar.rules:
        referenced.update(i.name for i in r.rhs if isinstance(i, Nonterminal))
    for name in sorted(referenced - defined):
        diags.append(
            Diagnostic("undefined-nonterminal", name, f"undefined nonterminal {name}")
        )

    # Reachability over the nonterminal reference graph.
    reach = {grammar.start}
    frontier = [grammar.start]
    adj: dict[str, set] = {}
    for r in grammar.rules:
        adj.setdefault(r.lhs, set()).update(
            i.name for i in r.rhs if isinstance(i, Nonterminal)
        )
    while frontier:
        for nxt in adj.get(frontier.pop(), ()):
            if nxt not in reach:
                reach.add(nxt)
                frontier.append(nxt)
    for name in sorted(defined - reach):
        diags.append(
            Diagnostic(
                "unreachable-nonterminal", name, f"nonterminal {name} unreachable from {grammar.start}"
            )
        )

    for name in sorted(grammar.lexsets):
        if grammar.lexsets[name] is None:
            diags.append(
                Diagnostic("unbound-lexset", name, f"lexset @{name} has no catalog bound")
            )

    # Generating (terminating) symbols: least fixpoint over rules.  A
    # lexset item generates iff its catalog is bound and non-empty.
    generating: set = set()
    changed = True
    while changed:
        changed = False
        for r in grammar.rules:
            if r.lhs in generating:
                continue
            ok = True
            for item in r.rhs:
                if isinstance(item, Nonterminal):
                    if item.name not in generating:
                        ok = False
                        break
                elif isinstance(item, LexSet):
                    cat = grammar.lexsets.get(item.name)
                    if cat is None or len(cat) == 0:
                        ok = False
                        break
            if ok:
                generating.add(r.lhs)
                changed = True
    for name in sorted((defined & reach) - generating):
        diags.append(
            Diagnostic(
                "nonterminating-nonterminal",
                name,
                f"nonterminal {name} has no terminating derivation",
            )
        )
    return diags


# ---------------------------------------------------------------------------
# .gcd text format
# ---------------------------------------------------------------------------
#
#   start S;
#   S ::= "ab" | "ac" ;
#   S ::= "[s] " @entities " [r] " @relations ;
#
# Quoted terminals support the escapes \" \\ \n \xNN.  `#` starts a
# comment running to end of line.  Alternation expands into one Rule per
# branch, in source order.

_ESCAPES = {'"': b'"', "\\": b"\\", "n": b"\n"}


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def error(self, message: str):
        raise GrammarSyntaxError(message, self.line, self.col)

    def _bump(self, ch: str):
        if ch == "\n":
            self.line += 1
            self.col = 1
        else:
            self.col += 1
        self.pos += 1

    def skip_ws(self):
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch == "#":
                while self.pos < len(self.text) and self.text[self.pos] != "\n":
                    self._bump(self.text[self.pos])
            elif ch.isspace():
                self._bump(ch)
            else:
                return

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, literal: str) -> bool:
        if self.text.startswith(literal, self.pos):
            for ch in literal:
                self._bump(ch)
            return True
        return False

    def expect(self, literal: str):
        if not self.take(literal):
            self.error(f"expected {literal!r}")

    def name(self) -> str:
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isalnum() or self.text[self.pos] in "_-."
        ):
            self._bump(self.text[self.pos])
        if self.pos == start:
            self.error("expected a name")
        return self.text[start : self.pos]

    def quoted(self) -> bytes:
        self.expect('"')
        out = bytearray()
        while True:
            if self.pos >= len(self.text):
                self.error("unterminated string")
            ch = self.text[self.pos]
            if ch == '"':
                self._bump(ch)
                return bytes(out)
            if ch == "\\":
                self._bump(ch)
                esc = self.peek()
                if esc in _ESCAPES:
                    out += _ESCAPES[esc]
                    self._bump(esc)
                elif esc == "x":
                    self._bump(esc)
                    hexpair = self.text[self.pos : self.pos + 2]
                    if len(hexpair) < 2 or any(c not in "0123456789abcdefABCDEF" for c in hexpair):
                        self.error("expected two hex digits after \\x")
                    out.append(int(hexpair, 16))
                    self._bump(hexpair[0])
                    self._bump(hexpair[1])
                else:
                    self.error(f"unknown escape sequence \\{esc}")
            else:
                out += ch.encode("utf-8")
                self._bump(ch)


def parse_grammar(dsl_text: str) -> Grammar:
    """Parse ``.gcd`` text into a Grammar (catalogs left unbound)."""
    sc = _Scanner(dsl_text)
    start: str | None = None
    rules: list[Rule] = []
    while True:
        sc.skip_ws()
        if not sc.peek():
            break
        if sc.take("start"):
            nxt = sc.peek()
            if nxt.isalnum() or nxt in "_-.":
                # Not the pragma, a rule name beginning with "start".
                rest = sc.name()
                _parse_rule(sc, "start" + rest, rules)
                continue
            sc.skip_ws()
            name = sc.name()
            sc.skip_ws()
            sc.expect(";")
            if start is not None:
                sc.error("duplicate start declaration")
            start = name
            continue
        lhs = sc.name()
        _parse_rule(sc, lhs, rules)
    if start is None:
        sc.error("missing start declaration")
    return Grammar(start=start, rules=tuple(rules))


def _parse_rule(sc: _Scanner, lhs: str, rules: list[Rule]):
    sc.skip_ws()
    sc.expect("::=")
    while True:
        items: list[RhsItem] = []
        while True:
            sc.skip_ws()
            ch = sc.peek()
            if ch == '"':
                items.append(Terminal(sc.quoted()))
            elif ch == "@":
                sc.take("@")
                items.append(LexSet(sc.name()))
            elif ch and (ch.isalnum() or ch in "_-."):
                items.append(Nonterminal(sc.name()))
            else:
                break
        if not items:
            sc.error("empty alternative (write \"\" for epsilon)")
        rules.append(Rule(lhs=lhs, rhs=tuple(items)))
        sc.skip_ws()
        if sc.take("|"):
            continue
        sc.expect(";")
        return


def _escape_terminal(data: bytes) -> str:
    out = ['"']
    for b in data:
        ch = chr(b)
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif 0x20 <= b < 0x7F:
            out.append(ch)
        else:
            out.append(f"\\x{b:02x}")
    out.append('"')
    return "".join(out)


def print_grammar(grammar: Grammar) -> str:
    """Render a grammar back to ``.gcd`` text; reparsing yields a
    structurally identical grammar."""
    lines = [f"start {grammar.start};"]
    for rule in grammar.rules:
        parts = []
        for item in rule.rhs:
            if isinstance(item, Terminal):
                if not isinstance(item.value, bytes):
                    raise GrammarError("token-level grammars have no text form")
                parts.append(_escape_terminal(item.value))
            elif isinstance(item, Nonterminal):
                parts.append(item.name)
            else:
                parts.append(f"@{item.name}")
        lines.append(f"{rule.lhs} ::= {' '.join(parts)} ;")
    return "\n".join(lines) + "\n"

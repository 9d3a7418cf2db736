"""Incremental byte-level Earley recognizer.

The recognizer advances one atom (byte, or token id for token-level
grammars) at a time and answers three questions about the consumed
prefix: is it still extendable to a member of the language (viable), is
it itself a member (complete), and which atoms may come next.

Representation notes:

* An in-progress terminal match is a *scan item* ``(rule, dot, offset,
  origin)`` carrying the offset inside the terminal's atom sequence, so
  multi-byte terminals never need per-byte grammar rules.
* An in-progress lexical-set match is a *cursor item* ``(rule, dot,
  origin, Cursor)`` walking the catalog trie.  When the cursor hits an
  accepting trie node the dot advances, which is the Earley complete
  step for the whole lexset item; one cursor therefore stands in for an
  arbitrarily large alternation of entry rules.
* Completions of a nonterminal spanning back to byte position ``o``
  consult the *wait chart*: a persistent parent-linked chain of nodes,
  one per position where at least one item was predicted.  Advancing a
  state never mutates the chain, so forked states share it structurally
  and a ParserState behaves as a value.
* Epsilon derivations are handled by static nullable precomputation:
  predicting a nullable nonterminal also advances the predicting item,
  which makes within-position completion order irrelevant.

Viability equals "frontier non-empty or complete" only for reduced
grammars (every symbol reachable and terminating); ``init`` therefore
requires a grammar that passed :func:`gcdkit.grammar.validate`.
"""

from __future__ import annotations

from typing import Iterable

from .grammar import Catalog, Grammar, Nonterminal, Terminal, validate

_T, _N, _L = 0, 1, 2  # compiled rhs item kinds


class InvalidGrammarError(Exception):
    def __init__(self, diagnostics):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


class _Engine:
    """Compiled, immutable form of a grammar shared by all its states."""

    def __init__(self, grammar: Grammar):
        diags = validate(grammar)
        if diags:
            raise InvalidGrammarError(diags)
        self.grammar = grammar
        self.rules: list[tuple[str, tuple]] = []  # (lhs, compiled rhs)
        self.rules_of: dict[str, list[int]] = {}
        for rule in grammar.rules:
            rhs = []
            for item in rule.rhs:
                if isinstance(item, Terminal):
                    rhs.append((_T, item.value))
                elif isinstance(item, Nonterminal):
                    rhs.append((_N, item.name))
                else:
                    rhs.append((_L, grammar.catalog(item.name)))
            idx = len(self.rules)
            self.rules.append((rule.lhs, tuple(rhs)))
            self.rules_of.setdefault(rule.lhs, []).append(idx)
        self.aug = len(self.rules)
        self.rules.append(("", ((_N, grammar.start),)))
        self.nullable = self._nullable()

    def _nullable(self) -> frozenset:
        nullable: set[str] = set()
        changed = True
        while changed:
            changed = False
            for lhs, rhs in self.rules[: self.aug]:
                if lhs in nullable:
                    continue
                if all(
                    (kind == _T and len(payload) == 0)
                    or (kind == _N and payload in nullable)
                    for kind, payload in rhs
                ):
                    nullable.add(lhs)
                    changed = True
        return frozenset(nullable)


class _ChartNode:
    """One wait-chart position: items whose dot sits before a nonterminal."""

    __slots__ = ("pos", "wait", "parent", "_hash")

    def __init__(self, pos: int, wait: dict, parent):
        self.pos = pos
        self.wait = wait  # symbol -> tuple of (rule, dot, origin)
        self.parent = parent
        self._hash = hash(
            (pos, frozenset((k, v) for k, v in wait.items()), parent._hash if parent else 0)
        )

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if not isinstance(other, _ChartNode):
            return NotImplemented
        a, b = self, other
        while a is not None and b is not None:
            if a is b:
                return True
            if a._hash != b._hash or a.pos != b.pos or a.wait != b.wait:
                return False
            a, b = a.parent, b.parent
        return a is None and b is None


class ParserState:
    """Immutable snapshot of the recognizer after a consumed atom prefix.

    Advancing returns a fresh state; the original stays untouched, which
    is what lets beam search fork hypotheses freely.
    """

    __slots__ = ("_engine", "pos", "scan", "cursors", "chart", "complete", "_hash")

    def __init__(self, engine, pos, scan, cursors, chart, complete):
        self._engine = engine
        self.pos = pos
        self.scan = scan  # frozenset of (rule, dot, offset, origin)
        self.cursors = cursors  # frozenset of (rule, dot, origin, Cursor)
        self.chart = chart
        self.complete = complete
        self._hash = None  # computed on demand; most states are never hashed

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash((id(self._engine), self.pos, self.scan, self.cursors, self.complete, self.chart))
            self._hash = h
        return h

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, ParserState):
            return NotImplemented
        return (
            self._engine is other._engine
            and self.pos == other.pos
            and self.complete == other.complete
            and self.scan == other.scan
            and self.cursors == other.cursors
            and self.chart == other.chart
        )

    @property
    def consumed(self) -> int:
        return self.pos

    def is_viable(self) -> bool:
        return self.complete or bool(self.scan) or bool(self.cursors)

    def is_complete(self) -> bool:
        return self.complete

    def advance(self, atom: int) -> "ParserState":
        """Consume one atom.  A non-viable result signals rejection."""
        eng = self._engine
        rules = eng.rules
        seeds: list = []
        scan_acc: list = []
        cursor_acc: list = []
        for item in self.scan:
            rule, dot, off, origin = item
            term = rules[rule][1][dot][1]
            if term[off] == atom:
                if off + 1 == len(term):
                    seeds.append((rule, dot + 1, origin))
                else:
                    scan_acc.append((rule, dot, off + 1, origin))
        for item in self.cursors:
            rule, dot, origin, cur = item
            cat: Catalog = rules[rule][1][dot][1]
            nxt = cat.step(cur, atom)
            if nxt is not None:
                if cat.accepting(nxt):
                    seeds.append((rule, dot + 1, origin))
                if cat.can_extend(nxt):
                    cursor_acc.append((rule, dot, origin, nxt))
        if not seeds:
            # No dot moved past a symbol, so no predict/complete closure:
            # the chart and completion flag cannot change.
            return ParserState(
                eng, self.pos + 1, frozenset(scan_acc), frozenset(cursor_acc), self.chart, False
            )
        return _close(eng, self.pos + 1, seeds, scan_acc, cursor_acc, self.chart)

    def advance_bytes(self, data: Iterable[int]) -> "ParserState":
        state = self
        for atom in data:
            state = state.advance(atom)
            if not state.is_viable():
                return state
        return state

    def allowed_atoms(self) -> set[int]:
        """Atoms ``a`` such that ``advance(a)`` is viable.

        For a reduced grammar every pending scan/cursor continuation is
        extendable to a full derivation, so the candidate atoms are
        exactly the viable ones.
        """
        rules = self._engine.rules
        out: set[int] = set()
        for rule, dot, off, _ in self.scan:
            out.add(rules[rule][1][dot][1][off])
        for rule, dot, _, cur in self.cursors:
            out.update(rules[rule][1][dot][1].next_atoms(cur))
        return out

    allowed_bytes = allowed_atoms


def _close(eng, pos, seeds, scan_acc, cursor_acc, chart) -> ParserState:
    """Run predict/complete closure at ``pos`` over freshly advanced items."""
    rules = eng.rules
    aug = eng.aug
    nullable = eng.nullable
    wait: dict = {}
    complete = False
    done: set = set()
    work = list(seeds)
    while work:
        item = work.pop()
        if item in done:
            continue
        done.add(item)
        rule, dot, origin = item
        lhs, rhs = rules[rule]
        if dot == len(rhs):
            if rule == aug:
                complete = True
                continue
            if origin == pos:
                # Zero-width completion: lhs is statically nullable, and
                # every waiter added at this position already skipped it.
                continue
            node = chart
            while node is not None and node.pos > origin:
                node = node.parent
            if node is None or node.pos != origin:
                continue
            for waiter in node.wait.get(lhs, ()):
                work.append((waiter[0], waiter[1] + 1, waiter[2]))
            continue
        kind, payload = rhs[dot]
        if kind == _T:
            if len(payload) == 0:
                work.append((rule, dot + 1, origin))
            else:
                scan_acc.append((rule, dot, 0, origin))
        elif kind == _L:
            cursor_acc.append((rule, dot, origin, payload.root()))
        else:
            if payload in wait:
                wait[payload] += (item,)
            else:
                wait[payload] = (item,)
                for r2 in eng.rules_of.get(payload, ()):
                    work.append((r2, 0, pos))
            if payload in nullable:
                work.append((rule, dot + 1, origin))
    if wait:
        chart = _ChartNode(pos, wait, chart)
    return ParserState(
        eng, pos, frozenset(scan_acc), frozenset(cursor_acc), chart, complete
    )


def _engine_for(grammar: Grammar) -> _Engine:
    # Cached so repeated init() calls on one grammar share the compiled
    # form and their states compare equal; bind() invalidates the cache.
    eng = getattr(grammar, "_compiled", None)
    if eng is None or eng.grammar is not grammar:
        eng = _Engine(grammar)
        grammar.__dict__["_compiled"] = eng
    return eng


def init(grammar: Grammar) -> ParserState:
    """Initial state for the empty prefix; complete iff epsilon is in L(G)."""
    eng = _engine_for(grammar)
    return _close(eng, 0, [(eng.aug, 0, 0)], [], [], None)


def advance(state: ParserState, atom: int) -> ParserState:
    return state.advance(atom)


def allowed_bytes(state: ParserState) -> set[int]:
    return state.allowed_atoms()


def is_viable(state: ParserState) -> bool:
    return state.is_viable()


def is_complete(state: ParserState) -> bool:
    return state.is_complete()


def accepts(grammar_or_state, data) -> bool:
    """Full-string membership: replay ``data`` and test completion."""
    state = init(grammar_or_state) if isinstance(grammar_or_state, Grammar) else grammar_or_state
    state = state.advance_bytes(data)
    return state.is_viable() and state.is_complete()

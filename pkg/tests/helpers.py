"""Independent oracles and random fixture generators.

Nothing here may call into the code paths it is used to check: language
enumeration works on the rule structure directly, masks are derived
from enumerated prefix sets, and span collection reparses the surface
string with its own tokenizer.
"""

from __future__ import annotations

import random
import re
from collections import Counter

from gcdkit.grammar import Catalog, Grammar, LexSet, Nonterminal, Rule, Terminal
from gcdkit.metrics import BracketTree
from gcdkit.vocab import Vocabulary, build_vocabulary


class TooBig(Exception):
    pass


def enumerate_language(grammar: Grammar, max_len: int, max_strings: int = 2000) -> set:
    """All members of L(G) with length <= max_len, by least fixpoint.

    Sound and complete for the bounded slice: any derivation of a short
    string passes only through shorter constituents.
    """
    token_level = any(
        isinstance(i, Terminal) and isinstance(i.value, tuple)
        for r in grammar.rules
        for i in r.rhs
    )
    empty = () if token_level else b""
    langs = {lhs: set() for lhs in {r.lhs for r in grammar.rules}}
    changed = True
    while changed:
        changed = False
        for rule in grammar.rules:
            acc = {empty}
            for item in rule.rhs:
                if isinstance(item, Terminal):
                    part = {item.value} if len(item.value) <= max_len else set()
                elif isinstance(item, LexSet):
                    part = {e for e in grammar.lexsets[item.name].entries if len(e) <= max_len}
                else:
                    part = langs[item.name]
                acc = {a + b for a in acc for b in part if len(a) + len(b) <= max_len}
                if len(acc) > 20 * max_strings:
                    raise TooBig
                if not acc:
                    break
            target = langs[rule.lhs]
            before = len(target)
            target |= acc
            if len(target) > 4 * max_strings:
                raise TooBig
            if len(target) != before:
                changed = True
    return langs[grammar.start]


def prefixes_of(lang: set) -> set:
    out = set()
    for s in lang:
        for i in range(len(s) + 1):
            out.add(s[:i])
    return out


def oracle_mask(lang: set, prefixes: set, vocab: Vocabulary, prefix: bytes):
    """Expected (allowed ids, eos) at a prefix, straight from the
    enumerated language: a token is allowed iff prefix+token is again a
    viable prefix (prefix sets are prefix-closed, so intermediate bytes
    are covered)."""
    allowed = [
        t
        for t in range(len(vocab.tokens))
        if t != vocab.eos_id and prefix + vocab.tokens[t] in prefixes
    ]
    return allowed, prefix in lang


def byte_replay_mask(state, vocab: Vocabulary):
    """Mask by replaying every token byte-by-byte through the recognizer;
    independent of the trie-product path inside compute_mask."""
    allowed = []
    for t in range(len(vocab.tokens)):
        if t == vocab.eos_id:
            continue
        st = state
        ok = True
        for b in vocab.tokens[t]:
            st = st.advance(b)
            if not st.is_viable():
                ok = False
                break
        if ok:
            allowed.append(t)
    return allowed, state.is_complete()


def engine_language(grammar: Grammar, max_len: int = 64, max_strings: int = 100000) -> set:
    """Enumerate L(G) through the recognizer itself (finite languages)."""
    from gcdkit.earley import init

    out = set()
    stack = [(init(grammar), b"")]
    while stack:
        state, prefix = stack.pop()
        if state.is_complete():
            out.add(prefix)
            if len(out) > max_strings:
                raise TooBig
        if len(prefix) >= max_len:
            raise TooBig
        for b in state.allowed_atoms():
            stack.append((state.advance(b), prefix + bytes([b])))
    return out


# ---------------------------------------------------------------------------
# Random grammars and vocabularies
# ---------------------------------------------------------------------------

_LEX_POOL = [b"aa", b"ab", b"ba", b"ca", b"abc", b"cb", b"bb", b"ac"]


def random_grammar(rng: random.Random) -> Grammar:
    """Acyclic random CFG over {a, b, c} with occasional epsilon rules and
    lexsets; every string is at most 12 bytes and |L| <= 500."""
    from gcdkit.grammar import validate

    for _ in range(200):
        n_nts = rng.randint(1, 4)
        nts = [f"N{i}" for i in range(n_nts)]
        use_lex = rng.random() < 0.4
        catalog = Catalog("L", rng.sample(_LEX_POOL, rng.randint(2, 5))) if use_lex else None
        rules = []
        for i, nt in enumerate(nts):
            for _ in range(rng.randint(1, 3)):
                rhs = []
                for _ in range(rng.randint(1, 3)):
                    roll = rng.random()
                    if use_lex and roll < 0.15:
                        rhs.append(LexSet("L"))
                    elif roll < 0.55 or i + 1 >= n_nts:
                        length = rng.choice((0, 1, 1, 2, 2, 3))
                        rhs.append(
                            Terminal(bytes(rng.choice(b"abc") for _ in range(length)))
                        )
                    else:
                        rhs.append(Nonterminal(rng.choice(nts[i + 1 :])))
                rules.append(Rule(nt, tuple(rhs)))
        grammar = Grammar(
            start="N0", rules=tuple(rules), lexsets={"L": catalog} if use_lex else {}
        )
        if validate(grammar):
            continue
        if _max_derivable_len(grammar) > 12:
            continue
        try:
            lang = enumerate_language(grammar, max_len=12, max_strings=500)
        except TooBig:
            continue
        if not lang or len(lang) > 500:
            continue
        return grammar
    raise RuntimeError("could not generate a suitable grammar")


def _max_derivable_len(grammar: Grammar) -> int:
    """Exact longest-string length for an acyclic grammar (fixpoint)."""
    best = {r.lhs: 0 for r in grammar.rules}
    changed = True
    while changed:
        changed = False
        for rule in grammar.rules:
            total = 0
            for item in rule.rhs:
                if isinstance(item, Terminal):
                    total += len(item.value)
                elif isinstance(item, LexSet):
                    total += max(len(e) for e in grammar.lexsets[item.name].entries)
                else:
                    total += best[item.name]
            if total > best[rule.lhs]:
                best[rule.lhs] = total
                changed = True
    return best[grammar.start]


def random_vocab(rng: random.Random, max_tokens: int = 64) -> Vocabulary:
    """At most ``max_tokens`` tokens (EOS included) over {a, b, c};
    duplicate surface forms included on purpose."""
    n = rng.randint(4, max_tokens - 2)
    tokens = []
    for _ in range(n):
        length = rng.randint(1, 4)
        tokens.append(bytes(rng.choice(b"abc") for _ in range(length)))
    if rng.random() < 0.3:
        tokens[-1] = rng.choice(tokens[:-1]) if n > 1 else tokens[-1]
    tokens.append(b"")
    assert len(tokens) <= max_tokens
    return build_vocabulary(tokens, eos_id=len(tokens) - 1)


# ---------------------------------------------------------------------------
# Constituency parsing oracles
# ---------------------------------------------------------------------------


def cp_all_strings(words, labels, max_open) -> set:
    """Brute-force generator of every admissible bracketing surface string.

    Mirrors the documented conventions: single root, words in order,
    label glued to its bracket, one space before words and before child
    brackets that follow a label or word, no empty constituents, open
    count capped by max_open.
    """
    words = [w.decode() if isinstance(w, bytes) else w for w in words]
    out = set()

    def rec(i, j, last, parts):
        if j == 0 and parts:
            if i == len(words):
                out.add("".join(parts))
            return
        if j < max_open and (j >= 1 or (i == 0 and not parts)):
            opener = "[" if last == "c" else " ["
            for label in labels:
                rec(i, j + 1, "o", parts + [opener + label])
        if i < len(words) and j >= 1:
            rec(i + 1, j, "w", parts + [" " + words[i]])
        if j >= 1 and last != "o":
            rec(i, j - 1, "c", parts + ["]"])

    rec(0, 0, "c", [])
    return out


_TOKEN = re.compile(r"[\[\]()]|[^\s\[\]()]+")


def reference_spans(text: str) -> Counter:
    """Span multiset straight off the surface string, no tree objects."""
    spans: Counter = Counter()
    stack = []
    leaf = 0
    tokens = _TOKEN.findall(text)
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok in "[(":
            stack.append((tokens[i + 1], leaf))
            i += 2
        elif tok in "])":
            label, start = stack.pop()
            spans[(label, start, leaf)] += 1
            i += 1
        else:
            leaf += 1
            i += 1
    return spans


def random_tree(rng: random.Random, words, labels) -> BracketTree:
    label = rng.choice(labels)
    if len(words) == 1 and rng.random() < 0.5:
        return BracketTree(label, (words[0],))
    children = []
    i = 0
    while i < len(words):
        j = rng.randint(i + 1, len(words))
        if j - i == 1 and rng.random() < 0.5:
            children.append(words[i])
        else:
            children.append(random_tree(rng, words[i:j], labels))
        i = j
    return BracketTree(label, tuple(children))


def tree_to_string(tree: BracketTree) -> str:
    parts = [f"[{tree.label}"]
    for child in tree.children:
        if isinstance(child, BracketTree):
            parts.append(" " + tree_to_string(child))
        else:
            parts.append(" " + child)
    return "".join(parts) + "]"

"""Admissible next-token computation.

The primary mode intersects the vocabulary byte trie with the byte-level
parser state: a depth-first product traversal that prunes a whole trie
subtree at the first rejected byte.  The alternative mode compiles the
grammar itself down to token-id terminals under a caller-supplied
tokenization function and recognizes token sequences directly; its
language is a subset of the character-level language whenever the
tokenizer admits multiple tokenizations of the same string.
"""

from __future__ import annotations

import os
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Sequence

from .earley import ParserState, _close, init
from .grammar import Catalog, Grammar, Rule, Terminal
from .vocab import Vocabulary, detokenize


class MaskError(Exception):
    pass


class TokenNotAllowedError(MaskError):
    """A decoder tried to advance with a token outside the current mask."""


class TokenizeError(MaskError):
    pass


class TokenMask:
    """Bitset of admissible token ids plus end-of-sequence admissibility.

    The EOS id is never a member of ``bits``; it is carried by
    ``eos_allowed`` because EOS has no surface bytes to match.
    """

    __slots__ = ("bits", "size", "eos_allowed")

    def __init__(self, bits: int, size: int, eos_allowed: bool):
        self.bits = bits
        self.size = size
        self.eos_allowed = eos_allowed

    def __eq__(self, other):
        if not isinstance(other, TokenMask):
            return NotImplemented
        return (
            self.bits == other.bits
            and self.size == other.size
            and self.eos_allowed == other.eos_allowed
        )

    def __hash__(self):
        return hash((self.bits, self.size, self.eos_allowed))

    def __repr__(self):
        return f"TokenMask({self.count()} of {self.size}, eos={self.eos_allowed})"

    def __contains__(self, token_id: int) -> bool:
        return 0 <= token_id < self.size and (self.bits >> token_id) & 1 == 1

    def ids(self) -> list[int]:
        bits = self.bits
        out = []
        while bits:
            low = bits & -bits
            out.append(low.bit_length() - 1)
            bits ^= low
        return out

    def count(self) -> int:
        return bin(self.bits).count("1")

    def to_bytes(self) -> bytes:
        """Little-endian bit order: bit i of byte i // 8 is token id i."""
        return self.bits.to_bytes((self.size + 7) // 8, "little")


class _MaskCache:
    """Size-bounded LRU over (vocab, state) keyed by structural equality."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._data: OrderedDict = OrderedDict()
        self._lock = threading.Lock()

    def get(self, key):
        with self._lock:
            hit = self._data.get(key)
            if hit is not None:
                self._data.move_to_end(key)
            return hit

    def put(self, key, value):
        with self._lock:
            self._data[key] = value
            self._data.move_to_end(key)
            while len(self._data) > self.capacity:
                self._data.popitem(last=False)


def _default_cache() -> _MaskCache | None:
    try:
        cap = int(os.environ.get("GCDKIT_CACHE", "0"))
    except ValueError:
        cap = 0
    return _MaskCache(cap) if cap > 0 else None


_cache = _default_cache()


def set_mask_cache(capacity: int) -> None:
    """Enable (capacity > 0) or disable the process-wide mask memo cache."""
    global _cache
    _cache = _MaskCache(capacity) if capacity > 0 else None


def _interior(cat: Catalog, vnode, cur, cache) -> tuple[int, tuple]:
    """Product of the vocabulary trie with one catalog-trie cursor.

    Returns the id bits of tokens whose bytes all stay inside the
    catalog (any token may end where the cursor is still alive or has
    just completed an entry), plus the completion events: (vocab node,
    byte depth) pairs where an entry ended and the byte path may spill
    over into whatever follows the lexset in its rule.  Both values are
    position-free, so they are memoized on (vocab node, cursor) alone.
    """
    key = (vnode, cur)
    hit = cache.get(key)
    if hit is not None:
        return hit
    bits = 0
    events: tuple = ()
    children = vnode.children
    if children:
        if len(children) > 8:
            pairs = [(b, children[b]) for b in cat.next_atoms(cur) if b in children]
        else:
            pairs = children.items()
        for b, child in pairs:
            nxt = cat.step(cur, b)
            if nxt is None:
                continue
            bits |= child.id_bits
            if cat.accepting(nxt):
                events += ((child, 1),)
            if cat.can_extend(nxt):
                cbits, cevents = _interior(cat, child, nxt, cache)
                bits |= cbits
                for evnode, depth in cevents:
                    events += ((evnode, depth + 1),)
    if len(cache) < 500_000:
        cache[key] = (bits, events)
    return bits, events


def _state_bits(eng, vnode, state: ParserState) -> int:
    """Union of per-item walks from ``vnode``: a token is admissible as
    soon as one derivation thread survives its bytes.

    Terminal threads walk the trie along the literal remainder; lexset
    threads run through the memoized trie product.  Wherever a thread's
    dot moves past its symbol mid-token, the followup items come from a
    predict/complete closure and the walk recurses from that byte depth;
    every recursion level consumes at least one byte, so the trie depth
    bounds it.
    """
    rules = eng.rules
    bits = 0
    for rule, dot, off, origin in state.scan:
        term = rules[rule][1][dot][1]
        node = vnode
        done = True
        for k in range(off, len(term)):
            node = node.children.get(term[k])
            if node is None:
                done = False
                break
            bits |= node.id_bits
        if done and node.children:
            closed = _close(
                eng, state.pos + len(term) - off, [(rule, dot + 1, origin)], [], [], state.chart
            )
            bits |= _state_bits(eng, node, closed)
    for rule, dot, origin, cur in state.cursors:
        cat: Catalog = rules[rule][1][dot][1]
        cache = cat.__dict__.setdefault("_product_cache", {})
        ibits, events = _interior(cat, vnode, cur, cache)
        bits |= ibits
        for evnode, depth in events:
            if not evnode.children:
                continue
            closed = _close(
                eng, state.pos + depth, [(rule, dot + 1, origin)], [], [], state.chart
            )
            bits |= _state_bits(eng, evnode, closed)
    return bits


def compute_mask(state: ParserState, vocab: Vocabulary) -> TokenMask:
    """Tokens whose full byte string keeps the state viable, plus EOS flag."""
    cache = _cache
    key = None
    if cache is not None:
        key = (id(vocab), state)
        hit = cache.get(key)
        if hit is not None:
            return hit
    mask = TokenMask(
        bits=_state_bits(state._engine, vocab.root, state),
        size=len(vocab),
        eos_allowed=state.is_complete(),
    )
    if cache is not None:
        cache.put(key, mask)
    return mask


def advance_token(state: ParserState, vocab: Vocabulary, token_id: int) -> ParserState:
    """Advance over all bytes of one token; equals folding byte advances."""
    if not 0 <= token_id < len(vocab):
        raise TokenNotAllowedError(f"token id {token_id} out of range")
    if token_id == vocab.eos_id:
        raise TokenNotAllowedError("EOS carries no bytes; end the sequence instead")
    for b in vocab.tokens[token_id]:
        state = state.advance(b)
        if not state.is_viable():
            raise TokenNotAllowedError(
                f"token {token_id} ({vocab.tokens[token_id]!r}) rejected by grammar"
            )
    return state


# ---------------------------------------------------------------------------
# Token-level grammar compilation
# ---------------------------------------------------------------------------

TokenizeFn = Callable[[bytes], Sequence[int]]


def greedy_tokenize(vocab: Vocabulary) -> TokenizeFn:
    """Reference canonical tokenization: longest trie match at each step.

    Among duplicate surface forms the lowest token id wins.
    """

    def tokenize(data: bytes) -> list[int]:
        out: list[int] = []
        i = 0
        n = len(data)
        while i < n:
            node = vocab.root
            best_id = -1
            best_end = i
            j = i
            while j < n:
                node = node.children.get(data[j])
                if node is None:
                    break
                j += 1
                if node.token_ids:
                    best_id = min(node.token_ids)
                    best_end = j
            if best_id < 0:
                raise TokenizeError(f"no token matches input at byte {i}: {data[i:i+8]!r}")
            out.append(best_id)
            i = best_end
        return out

    return tokenize


@dataclass(frozen=True)
class TokenGrammar:
    """Grammar whose terminal atoms are token ids of a fixed vocabulary."""

    grammar: Grammar
    vocab: Vocabulary
    source: Grammar


def compile_token_grammar(
    grammar: Grammar, vocab: Vocabulary, tokenize: TokenizeFn
) -> TokenGrammar:
    """Replace every terminal byte string (and every catalog entry) with
    its canonical token-id sequence.

    Each substitution is round-trip checked: a tokenization that does not
    detokenize back to the original bytes is rejected as lossy.
    """

    def convert(data: bytes) -> tuple[int, ...]:
        ids = tuple(tokenize(data))
        back = detokenize(vocab, ids)
        if back != data:
            raise TokenizeError(
                f"lossy tokenization: {data!r} -> {ids} -> {back!r}"
            )
        return ids

    lexsets = {}
    for name, cat in grammar.lexsets.items():
        if cat is None:
            raise MaskError(f"lexset @{name} must be bound before compilation")
        lexsets[name] = Catalog(cat.name, [convert(e) for e in cat.entries])
    rules = []
    for rule in grammar.rules:
        rhs = []
        for item in rule.rhs:
            if isinstance(item, Terminal):
                rhs.append(Terminal(convert(item.value)))
            else:
                rhs.append(item)
        rules.append(Rule(lhs=rule.lhs, rhs=tuple(rhs)))
    tg = Grammar(start=grammar.start, rules=tuple(rules), lexsets=lexsets)
    return TokenGrammar(grammar=tg, vocab=vocab, source=grammar)


def token_grammar_mask(tg: TokenGrammar, prefix: Sequence[int]) -> TokenMask:
    """Allowed next tokens after a token-id prefix of the token grammar."""
    state = init(tg.grammar)
    for pos, tid in enumerate(prefix):
        state = state.advance(tid)
        if not state.is_viable():
            raise MaskError(f"prefix not viable in token grammar at step {pos}")
    bits = 0
    for tid in state.allowed_atoms():
        bits |= 1 << tid
    return TokenMask(bits=bits, size=len(tg.vocab), eos_allowed=state.is_complete())

"""Flat session API over the gcdkit mask engine for host LM stacks.

The surface is deliberately C-shaped: sessions are opaque integer
handles, masks come back as little-endian bitset bytes ready for logit
masking (bit ``i`` of byte ``i // 8`` is token id ``i``), and no
callbacks cross the boundary.  A handle is confined to one thread of
control; distinct handles are independent, and forking a handle is how
a beam search keeps divergent hypotheses.

    handle = bridge_open("g.gcd", {"entities": "ents.txt"}, "vocab.json")
    bits, eos_ok = bridge_mask(handle)
    bridge_advance(handle, chosen_token)
    child = bridge_fork(handle)
    bridge_close(handle)
"""

from __future__ import annotations

import itertools
import threading
from typing import NamedTuple

from gcdkit.earley import ParserState, init
from gcdkit.grammar import GrammarError, load_catalog, parse_grammar, validate
from gcdkit.mask import TokenNotAllowedError, advance_token, compute_mask
from gcdkit.vocab import VocabError, Vocabulary, load_vocab

__all__ = [
    "AdvanceStatus",
    "BridgeError",
    "InvalidHandleError",
    "TokenRejectedError",
    "bridge_advance",
    "bridge_close",
    "bridge_fork",
    "bridge_mask",
    "bridge_open",
]


class BridgeError(Exception):
    pass


class InvalidHandleError(BridgeError):
    pass


class TokenRejectedError(BridgeError):
    pass


class AdvanceStatus(NamedTuple):
    consumed: int  # tokens accepted on this handle so far
    complete: bool  # EOS is admissible right now


class _Session:
    __slots__ = ("grammar", "vocab", "state", "consumed")

    def __init__(self, grammar, vocab: Vocabulary, state: ParserState, consumed: int = 0):
        self.grammar = grammar
        self.vocab = vocab
        self.state = state
        self.consumed = consumed


_sessions: dict[int, _Session] = {}
_handles = itertools.count(1)
_registry_lock = threading.Lock()


def _get(handle: int) -> _Session:
    session = _sessions.get(handle)
    if session is None:
        raise InvalidHandleError(f"no open session with handle {handle}")
    return session


def bridge_open(grammar_path, catalog_bindings: dict | None, vocab_path) -> int:
    """Compile grammar + catalogs + vocabulary into a fresh session.

    ``catalog_bindings`` maps lexset names to catalog file paths.
    Raises on I/O problems, grammar diagnostics, or vocabulary errors.
    """
    try:
        with open(grammar_path, "r", encoding="utf-8") as fh:
            grammar = parse_grammar(fh.read())
        for name, path in (catalog_bindings or {}).items():
            grammar.bind(name, load_catalog(path, name=name))
        vocab = load_vocab(vocab_path)
    except (OSError, GrammarError, VocabError) as exc:
        raise BridgeError(str(exc)) from exc
    diags = validate(grammar)
    if diags:
        raise BridgeError("; ".join(str(d) for d in diags))
    session = _Session(grammar, vocab, init(grammar))
    with _registry_lock:
        handle = next(_handles)
        _sessions[handle] = session
    return handle


def bridge_mask(handle: int) -> tuple[bytes, bool]:
    """Current admissible-token bitset and whether EOS may end the output."""
    session = _get(handle)
    mask = compute_mask(session.state, session.vocab)
    return mask.to_bytes(), mask.eos_allowed


def bridge_advance(handle: int, token_id: int) -> AdvanceStatus:
    """Commit one token chosen by the host decoder."""
    session = _get(handle)
    try:
        session.state = advance_token(session.state, session.vocab, token_id)
    except TokenNotAllowedError as exc:
        raise TokenRejectedError(str(exc)) from exc
    session.consumed += 1
    return AdvanceStatus(consumed=session.consumed, complete=session.state.is_complete())


def bridge_fork(handle: int) -> int:
    """Clone the session; parser states are immutable values, so parent
    and child advance independently from here on."""
    session = _get(handle)
    clone = _Session(session.grammar, session.vocab, session.state, session.consumed)
    with _registry_lock:
        child = next(_handles)
        _sessions[child] = clone
    return child


def bridge_close(handle: int) -> None:
    with _registry_lock:
        if _sessions.pop(handle, None) is None:
            raise InvalidHandleError(f"no open session with handle {handle}")

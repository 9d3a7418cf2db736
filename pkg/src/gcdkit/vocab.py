"""Tokenizer vocabulary: id -> byte string table plus a byte trie.

No tokenizer algorithm lives here; the engine consumes only the realized
vocabulary.  The JSON format stores each token as a plain string (UTF-8
encoded to bytes) or as ``{"b": "<base64>"}`` for tokens that are not
valid UTF-8.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from typing import Sequence


class VocabError(Exception):
    pass


class TrieNode:
    __slots__ = ("children", "token_ids", "id_bits")

    def __init__(self):
        self.children: dict[int, TrieNode] = {}
        self.token_ids: tuple[int, ...] = ()
        self.id_bits: int = 0  # OR of 1 << id for every id ending here


@dataclass(frozen=True, eq=False)
class Vocabulary:
    tokens: tuple[bytes, ...]
    eos_id: int
    root: TrieNode

    def __len__(self):
        return len(self.tokens)

    def lookup(self, data: bytes) -> tuple[int, ...]:
        """Token ids whose byte string equals ``data`` exactly."""
        node = self.root
        for b in data:
            node = node.children.get(b)
            if node is None:
                return ()
        return node.token_ids


def build_vocabulary(tokens: Sequence[bytes], eos_id: int) -> Vocabulary:
    n = len(tokens)
    if not 0 <= eos_id < n:
        raise VocabError(f"eos id {eos_id} out of range for {n} tokens")
    if tokens[eos_id] != b"":
        raise VocabError("EOS token must have an empty byte string")
    root = TrieNode()
    for tid, tok in enumerate(tokens):
        if tid == eos_id:
            continue
        if not tok:
            raise VocabError(f"token {tid} is empty but is not EOS")
        node = root
        for b in tok:
            child = node.children.get(b)
            if child is None:
                child = TrieNode()
                node.children[b] = child
            node = child
        node.token_ids = node.token_ids + (tid,)
        node.id_bits |= 1 << tid
    return Vocabulary(tokens=tuple(tokens), eos_id=eos_id, root=root)


def load_vocab(path) -> Vocabulary:
    """Load ``{"eos": <id>, "tokens": [<string-or-{"b":base64}>, ...]}``."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise VocabError(f"{path}: malformed JSON: {exc}") from exc
    if not isinstance(doc, dict) or "eos" not in doc:
        raise VocabError(f"{path}: missing eos declaration")
    raw = doc.get("tokens")
    if not isinstance(raw, list):
        raise VocabError(f"{path}: tokens must be an array indexed by token id")
    tokens: list[bytes] = []
    for i, entry in enumerate(raw):
        if isinstance(entry, str):
            tokens.append(entry.encode("utf-8"))
        elif isinstance(entry, dict) and set(entry) == {"b"}:
            try:
                tokens.append(base64.b64decode(entry["b"], validate=True))
            except Exception as exc:
                raise VocabError(f"{path}: token {i}: bad base64") from exc
        else:
            raise VocabError(
                f"{path}: token {i} must be a string or {{\"b\": base64}}"
            )
    eos = doc["eos"]
    if not isinstance(eos, int):
        raise VocabError(f"{path}: eos must be an integer id")
    return build_vocabulary(tokens, eos)


def dump_vocab(vocab: Vocabulary) -> str:
    """Inverse of :func:`load_vocab`, for writing fixtures."""
    entries = []
    for tok in vocab.tokens:
        try:
            entries.append(tok.decode("utf-8"))
        except UnicodeDecodeError:
            entries.append({"b": base64.b64encode(tok).decode("ascii")})
    return json.dumps({"eos": vocab.eos_id, "tokens": entries})


def detokenize(vocab: Vocabulary, ids: Sequence[int]) -> bytes:
    """Concatenate per-id byte strings; EOS contributes nothing."""
    n = len(vocab.tokens)
    for tid in ids:
        if not 0 <= tid < n:
            raise VocabError(f"token id {tid} out of range for vocabulary of {n}")
    return b"".join(vocab.tokens[tid] for tid in ids)

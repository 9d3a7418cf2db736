from __future__ import annotations

import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gcdkit.grammar import Catalog, parse_grammar
from gcdkit.templates import CieSchema, build_cie_grammar
from gcdkit.vocab import build_vocabulary

_SYLLABLES = [
    "al", "an", "ar", "ba", "be", "ca", "co", "da", "de", "el", "en", "er",
    "fa", "ga", "ha", "in", "is", "ka", "la", "le", "li", "lo", "ma", "me",
    "mi", "na", "ne", "no", "on", "or", "pa", "pe", "ra", "re", "ri", "ro",
    "sa", "se", "si", "so", "ta", "te", "ti", "to", "ur", "va", "ve", "vi",
]


def word_pool(seed: int, count: int) -> list[str]:
    rng = random.Random(seed)
    words = set()
    while len(words) < count:
        words.add("".join(rng.choice(_SYLLABLES) for _ in range(rng.randint(2, 4))))
    return sorted(words)


def vocab_from_pool(pool, pair_tokens: int = 0, pair_seed: int = 17):
    """Byte-level vocabulary: printable single bytes plus subword forms
    drawn from the pool (4 forms per word), optionally extended with
    two-word merge tokens so masks probe catalogs past the first word."""
    tokens = [bytes([b]) for b in range(32, 127)]
    seen = set(tokens)
    for w in pool:
        for form in (w, " " + w, w + "_", "_" + w):
            b = form.encode()
            if b not in seen:
                seen.add(b)
                tokens.append(b)
    rng = random.Random(pair_seed)
    while pair_tokens > 0:
        b = f"{rng.choice(pool)}_{rng.choice(pool)}".encode()
        if b not in seen:
            seen.add(b)
            tokens.append(b)
            pair_tokens -= 1
    tokens.append(b"")
    return build_vocabulary(tokens, eos_id=len(tokens) - 1)


def catalog_from_pool(name: str, size: int, seed: int, pool) -> Catalog:
    rng = random.Random(seed)
    entries = set()
    while len(entries) < size:
        entries.add("_".join(rng.choice(pool) for _ in range(rng.randint(2, 3))).encode())
    return Catalog(name, entries)


@pytest.fixture(scope="session")
def g1():
    return parse_grammar('start S;\nS ::= "ab" | "ac" ;')


@pytest.fixture(scope="session")
def v1():
    # ids: a=0 b=1 c=2 ab=3 bc=4 eos=5
    return build_vocabulary([b"a", b"b", b"c", b"ab", b"bc", b""], eos_id=5)


@pytest.fixture(scope="session")
def bench_setup():
    """Shared ~32k-token vocabulary plus a word pool for catalogs.

    The catalog pool is five times wider than the vocabulary's own word
    coverage, so the trie product keeps growing across the whole
    1k..100k catalog sweep instead of saturating early."""
    pool = word_pool(7, 40000)
    vocab_words = random.Random(3).sample(pool, 8000)
    return vocab_from_pool(vocab_words, pair_tokens=6000), pool


@pytest.fixture(scope="session")
def toy_cie():
    """cIE grammar over 100 entities and 10 relations, with a vocabulary
    that covers their surface forms."""
    pool = word_pool(21, 200)
    entities = Catalog(
        "entities", {f"{a}_{b}".encode() for a, b in zip(pool[:100], pool[100:])}
    )
    relations = Catalog("relations", {f"rel {w}".encode() for w in pool[:10]})
    grammar = build_cie_grammar(CieSchema(entities, relations))
    tokens = [bytes([b]) for b in range(32, 127)]
    seen = set(tokens)
    for w in pool:
        for form in (w, " " + w, w + "_"):
            b = form.encode()
            if b not in seen:
                seen.add(b)
                tokens.append(b)
    tokens.append(b"")
    vocab = build_vocabulary(tokens, eos_id=len(tokens) - 1)
    return grammar, vocab

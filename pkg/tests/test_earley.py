from __future__ import annotations

import random

import pytest

from gcdkit.earley import InvalidGrammarError, accepts, init
from gcdkit.grammar import Catalog, parse_grammar
from helpers import enumerate_language, prefixes_of, random_grammar


@pytest.fixture(scope="module")
def g1_state(g1):
    return init(g1)


class TestBasics:
    def test_init_viable_not_complete(self, g1_state):
        assert g1_state.is_viable() and not g1_state.is_complete()

    def test_epsilon_language_complete_at_init(self):
        s = init(parse_grammar('start S;\nS ::= "" ;'))
        assert s.is_viable() and s.is_complete()

    def test_cie_style_zero_triplets(self):
        g = parse_grammar('start S;\nS ::= "" | T S ;\nT ::= "[s] x" ;')
        assert init(g).is_complete()

    def test_advance_and_reject(self, g1_state):
        a = g1_state.advance(ord("a"))
        assert a.is_viable() and not a.is_complete()
        ab = a.advance(ord("b"))
        assert ab.is_viable() and ab.is_complete()
        bad = g1_state.advance(ord("b"))
        assert not bad.is_viable()

    def test_allowed_bytes(self, g1_state):
        assert g1_state.allowed_atoms() == {ord("a")}
        assert g1_state.advance(ord("a")).allowed_atoms() == {ord("b"), ord("c")}

    def test_lexset_midmatch_allowed_bytes(self):
        g = parse_grammar("start S;\nS ::= @w ;")
        g.bind("w", Catalog("w", [b"film", b"fish"]))
        s = init(g).advance_bytes(b"fi")
        assert s.allowed_atoms() == {ord("l"), ord("s")}

    def test_invalid_grammar_rejected(self):
        with pytest.raises(InvalidGrammarError):
            init(parse_grammar("start S;\nS ::= S ;"))

    def test_fork_safety(self, g1_state):
        parent = g1_state.advance(ord("a"))
        before = parent.allowed_atoms()
        child = parent.advance(ord("b"))
        assert child.is_complete()
        assert parent.allowed_atoms() == before

    def test_determinism_structural_equality(self, g1):
        a = init(g1).advance_bytes(b"a")
        b = init(g1).advance_bytes(b"a")
        assert a == b and hash(a) == hash(b)
        assert a != init(g1).advance_bytes(b"ab")


class TestRecursionShapes:
    def test_left_recursion(self):
        g = parse_grammar('start S;\nS ::= S "a" | "a" ;')
        state = init(g)
        for _ in range(50):
            state = state.advance(ord("a"))
            assert state.is_viable() and state.is_complete()

    def test_right_recursion(self):
        g = parse_grammar('start S;\nS ::= "a" S | "a" ;')
        state = init(g).advance_bytes(b"aaaa")
        assert state.is_complete()

    def test_nested_epsilon(self):
        g = parse_grammar('start S;\nS ::= A B ;\nA ::= "" | "a" ;\nB ::= "" | "b" ;')
        lang = {b"", b"a", b"b", b"ab"}
        for s in lang:
            assert accepts(g, s)
        assert not accepts(g, b"ba")

    def test_center_recursion(self):
        g = parse_grammar('start S;\nS ::= "a" S "b" | "" ;')
        assert accepts(g, b"aaabbb")
        assert not accepts(g, b"aab")

    def test_ambiguous_grammar(self):
        g = parse_grammar('start S;\nS ::= S S | "a" ;')
        assert accepts(g, b"aaaa")
        assert not accepts(g, b"")


class TestOracleEquivalence:
    """Soundness and completeness against exhaustive enumeration.

    For fully finite languages the enumeration is a complete oracle and
    the allowed-byte sets must match exactly; for infinite languages the
    bounded slice still decides membership exactly and gives one-sided
    viability evidence.
    """

    HAND_CASES = [
        ('start S;\nS ::= "ab" | "ac" ;', True),
        ('start S;\nS ::= "" | "a" S ;', False),
        ('start S;\nS ::= A A ;\nA ::= "a" | "bc" | "" ;', True),
        ('start S;\nS ::= "a" S "b" | "" ;', False),
        ('start S;\nS ::= S "x" | "y" ;', False),
    ]

    @pytest.mark.parametrize("text,finite", HAND_CASES)
    def test_hand_grammars(self, text, finite):
        g = parse_grammar(text)
        self._check(g, max_len=8, finite=finite)

    def test_lexset_grammar(self):
        g = parse_grammar('start S;\nS ::= @w "!" | @w ;')
        g.bind("w", Catalog("w", [b"ab", b"a", b"abc"]))
        self._check(g, max_len=6, finite=True)

    def test_random_grammars(self):
        rng = random.Random(1234)
        for _ in range(15):
            self._check(random_grammar(rng), max_len=12, finite=True)

    @staticmethod
    def _check(g, max_len, finite):
        lang = enumerate_language(g, max_len=max_len)
        prefixes = prefixes_of(lang)
        alphabet = sorted({b for p in prefixes for b in p} | set(b"abc"))
        for p in sorted(prefixes):
            state = init(g).advance_bytes(p)
            assert state.is_viable(), p
            assert state.is_complete() == (p in lang), p
            allowed = state.allowed_atoms()
            for b in alphabet:
                if p + bytes([b]) in prefixes:
                    assert b in allowed, (p, b)
                elif finite:
                    assert b not in allowed, (p, b)
        if finite:
            rng = random.Random(0)
            for p in rng.sample(sorted(prefixes), min(10, len(prefixes))):
                for b in alphabet:
                    if p + bytes([b]) not in prefixes:
                        assert not init(g).advance_bytes(p + bytes([b])).is_viable()
                        break

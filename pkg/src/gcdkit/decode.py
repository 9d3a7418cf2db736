"""Constrained greedy and beam decoding over an abstract scorer.

The decoder consults the mask engine every step and only ever extends a
hypothesis with admissible tokens, so EOS-terminated outputs are members
of the grammar's language by construction.  Accumulated scores are raw
(unrenormalized) masked log-probabilities by default: renormalizing over
the allowed set would hide exactly the grammar/model likelihood
misalignment that the length-normalized ranking and the empty-string
report exist to surface.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .earley import ParserState, init
from .grammar import Grammar
from .mask import advance_token, compute_mask
from .vocab import Vocabulary, detokenize


class DecodeError(Exception):
    pass


class Scorer(Protocol):
    """Anything that maps a token-id context to next-token log-probabilities.

    ``reentrant`` declares whether one instance may serve several decode
    sessions concurrently.
    """

    reentrant: bool

    def next_logprobs(self, context: Sequence[int]) -> np.ndarray: ...


class UniformScorer:
    reentrant = True

    def __init__(self, n: int):
        self._row = np.full(n, -math.log(n))

    def next_logprobs(self, context):
        return self._row


class ReplayScorer:
    """Fixed per-step rows; the step index is the context length."""

    reentrant = False

    def __init__(self, rows: Sequence[Sequence[float]]):
        self.rows = [np.asarray(r, dtype=float) for r in rows]

    def next_logprobs(self, context):
        step = len(context)
        if step >= len(self.rows):
            raise DecodeError(f"replay scorer exhausted: step {step} of {len(self.rows)}")
        return self.rows[step]


class BigramScorer:
    """Rows keyed by the last context token id; key "" scores the start."""

    reentrant = True

    def __init__(self, table: dict):
        self.table = {k: np.asarray(v, dtype=float) for k, v in table.items()}

    def next_logprobs(self, context):
        key = str(context[-1]) if context else ""
        row = self.table.get(key)
        if row is None:
            raise DecodeError(f"bigram table has no row for context {key!r}")
        return row


class RandomScorer:
    """Deterministic pseudo-random log-softmax rows, pure in the context.

    ``eos_bonus`` shifts the EOS logit before normalization; useful to
    keep random walks over unbounded languages finite.
    """

    reentrant = True

    def __init__(self, n: int, seed: int, eos_id: int | None = None, eos_bonus: float = 0.0):
        self.n = n
        self.seed = seed
        self.eos_id = eos_id
        self.eos_bonus = eos_bonus

    def next_logprobs(self, context):
        rng = np.random.default_rng(hash((self.seed,) + tuple(context)) & 0xFFFFFFFF)
        logits = rng.standard_normal(self.n)
        if self.eos_id is not None:
            logits[self.eos_id] += self.eos_bonus
        return logits - np.log(np.exp(logits).sum())


def uniform_scorer(n: int) -> UniformScorer:
    return UniformScorer(n)


def replay_scorer(path) -> ReplayScorer:
    """Load a JSON-lines file, one dense logprob row per decode step."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            if not isinstance(row, list):
                raise DecodeError(f"{path}:{lineno}: expected a JSON array")
            rows.append(row)
    return ReplayScorer(rows)


def ngram_scorer(path) -> BigramScorer:
    """Load a JSON map from context token id (or "") to a dense row."""
    with open(path, "r", encoding="utf-8") as fh:
        table = json.load(fh)
    if not isinstance(table, dict):
        raise DecodeError(f"{path}: expected a JSON object")
    return BigramScorer(table)


@dataclass(frozen=True)
class Hypothesis:
    ids: tuple[int, ...]
    logprob_sum: float
    state: ParserState
    finished: bool

    def text(self, vocab: Vocabulary) -> bytes:
        return detokenize(vocab, self.ids)


@dataclass(frozen=True)
class DecodeConfig:
    beam_size: int = 2
    max_tokens: int = 256
    alpha: float = 1.0
    select_nonempty: bool = True
    renormalize: bool = False

    def __post_init__(self):
        if self.beam_size < 1 or self.max_tokens < 1:
            raise DecodeError("beam_size and max_tokens must be at least 1")
        if self.alpha < 0:
            raise DecodeError("alpha must be non-negative")


def length_normalized_score(h: Hypothesis, alpha: float) -> float:
    """Length-adjusted score: logprob sum divided by token count ** alpha."""
    m = len(h.ids)
    if m < 1:
        raise DecodeError("cannot score an empty hypothesis")
    return h.logprob_sum / (m**alpha)


def _step_scores(row, candidates, renormalize):
    row = np.asarray(row, dtype=float)
    scores = row[candidates]
    if renormalize:
        mx = scores.max()
        scores = scores - (mx + math.log(np.exp(scores - mx).sum()))
    return scores


def _candidate_ids(mask, eos_id):
    cands = mask.ids()
    if mask.eos_allowed:
        cands.append(eos_id)
        cands.sort()
    return cands


def constrained_greedy(
    scorer: Scorer, grammar: Grammar, vocab: Vocabulary, config: DecodeConfig | None = None
) -> Hypothesis:
    """Pick the masked argmax each step; ties go to the lowest token id."""
    config = config or DecodeConfig()
    state = init(grammar)
    ids: list[int] = []
    total = 0.0
    for _ in range(config.max_tokens):
        mask = compute_mask(state, vocab)
        candidates = _candidate_ids(mask, vocab.eos_id)
        if not candidates:
            raise DecodeError("empty mask with EOS disallowed on a viable state")
        scores = _step_scores(scorer.next_logprobs(ids), candidates, config.renormalize)
        best = int(np.argmax(scores))
        pick = candidates[best]
        total += float(scores[best])
        ids.append(pick)
        if pick == vocab.eos_id:
            return Hypothesis(tuple(ids), total, state, finished=True)
        state = advance_token(state, vocab, pick)
    return Hypothesis(tuple(ids), total, state, finished=False)


def constrained_beam(
    scorer: Scorer, grammar: Grammar, vocab: Vocabulary, config: DecodeConfig | None = None
) -> list[Hypothesis]:
    """Beam search with per-step mask pruning.

    EOS extensions retire their hypothesis to a finished pool; the pool
    is ranked by the length-normalized score.  With ``select_nonempty``
    the best non-empty hypothesis is moved to the front whenever one
    exists.  If nothing finished within ``max_tokens``, the surviving
    (unfinished) hypotheses are ranked instead.
    """
    config = config or DecodeConfig()
    eos = vocab.eos_id
    beams: list[Hypothesis] = [Hypothesis((), 0.0, init(grammar), finished=False)]
    finished: list[Hypothesis] = []
    for _ in range(config.max_tokens):
        if not beams:
            break
        pool = []  # (new_total, token, parent_index)
        for idx, hyp in enumerate(beams):
            mask = compute_mask(hyp.state, vocab)
            candidates = _candidate_ids(mask, eos)
            if not candidates:
                raise DecodeError("empty mask with EOS disallowed on a viable state")
            scores = _step_scores(
                scorer.next_logprobs(hyp.ids), candidates, config.renormalize
            )
            if len(candidates) > config.beam_size:
                # Stable sort keeps the ascending-id order among ties.
                keep = np.argsort(-scores, kind="stable")[: config.beam_size]
            else:
                keep = range(len(candidates))
            for k in keep:
                pool.append((hyp.logprob_sum + float(scores[k]), candidates[k], idx))
        pool.sort(key=lambda c: (-c[0], c[1], c[2]))
        next_beams = []
        for total, token, idx in pool[: config.beam_size]:
            parent = beams[idx]
            ids = parent.ids + (token,)
            if token == eos:
                finished.append(Hypothesis(ids, total, parent.state, finished=True))
            else:
                next_beams.append(
                    Hypothesis(ids, total, advance_token(parent.state, vocab, token), False)
                )
        beams = next_beams

    ranked_pool = finished if finished else beams
    ranked = sorted(
        ranked_pool,
        key=lambda h: (-length_normalized_score(h, config.alpha), h.ids),
    )
    if config.select_nonempty and finished:
        nonempty = [h for h in ranked if h.ids != (eos,)]
        if nonempty and ranked[0].ids == (eos,):
            ranked.remove(nonempty[0])
            ranked.insert(0, nonempty[0])
    return ranked


@dataclass(frozen=True)
class EmptyStringReport:
    top_is_empty: bool
    alpha_star: float | None


def empty_string_report(ranked: Sequence[Hypothesis], eos_id: int) -> EmptyStringReport:
    """Diagnose the empty-string pathology on a ranked hypothesis list.

    ``alpha_star`` is the normalization exponent at which ranks 1 and 2
    would swap, found by bisecting S1/m1**a - S2/m2**a over [0, 16];
    None when the two curves do not cross there.
    """
    if not ranked:
        raise DecodeError("need at least one ranked hypothesis")
    top_is_empty = ranked[0].ids == (eos_id,)
    if len(ranked) < 2:
        return EmptyStringReport(top_is_empty, None)
    s1, m1 = ranked[0].logprob_sum, len(ranked[0].ids)
    s2, m2 = ranked[1].logprob_sum, len(ranked[1].ids)

    def gap(alpha: float) -> float:
        return s1 / (m1**alpha) - s2 / (m2**alpha)

    lo, hi = 0.0, 16.0
    glo, ghi = gap(lo), gap(hi)
    if glo == 0.0:
        return EmptyStringReport(top_is_empty, lo)
    if glo * ghi > 0:
        return EmptyStringReport(top_is_empty, None)
    for _ in range(200):
        mid = (lo + hi) / 2
        gm = gap(mid)
        if gm == 0.0:
            return EmptyStringReport(top_is_empty, mid)
        if glo * gm < 0:
            hi = mid
        else:
            lo, glo = mid, gm
    return EmptyStringReport(top_is_empty, (lo + hi) / 2)

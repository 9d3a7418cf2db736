"""Per-token mask-computation overhead measurement.

The walk is scorer-free: at each step the next token is drawn uniformly
at random from the current mask with EOS excluded, so the measurement
isolates the grammar-side cost (mask + state advance) from any model
forward pass.  Timings use the monotonic performance counter, and the
report excludes a warmup walk run beforehand.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass

from .earley import init
from .grammar import Grammar
from .mask import advance_token, compute_mask
from .vocab import Vocabulary


@dataclass(frozen=True)
class LatencyReport:
    grammar: str
    vocab_size: int
    steps: int  # steps actually measured
    mean_us: float
    p50_us: float
    p95_us: float
    truncated: bool  # walk dead-ended before the requested step count

    def to_json(self) -> str:
        return json.dumps(self.__dict__)


def _percentile(sorted_values, q: float) -> float:
    if not sorted_values:
        return 0.0
    idx = min(len(sorted_values) - 1, int(round(q * (len(sorted_values) - 1))))
    return sorted_values[idx]


def _walk(grammar, vocab, rng, max_steps, timings):
    """One random admissible walk; returns (steps completed, dead-ended)."""
    state = init(grammar)
    steps = 0
    while steps < max_steps:
        t0 = time.perf_counter()
        mask = compute_mask(state, vocab)
        ids = mask.ids()
        if not ids:
            return steps, True
        token = ids[rng.randrange(len(ids))]
        state = advance_token(state, vocab, token)
        if timings is not None:
            timings.append((time.perf_counter() - t0) * 1e6)
        steps += 1
    return steps, False


def measure_overhead(
    grammar: Grammar,
    vocab: Vocabulary,
    steps: int,
    seed: int = 0,
    warmup_steps: int = 100,
    label: str = "grammar",
) -> LatencyReport:
    """Time ``compute_mask`` plus ``advance_token`` over a seeded walk.

    Walks are reproducible from the seed.  On finite languages the walk
    may dead-end early; the report then covers the completed steps and
    sets ``truncated``.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    rng = random.Random(seed)
    done = 0
    while done < warmup_steps:
        advanced, _ = _walk(grammar, vocab, rng, warmup_steps - done, None)
        done += max(advanced, 1)

    rng = random.Random(seed)  # identical token choices across runs
    timings: list[float] = []
    completed, dead = _walk(grammar, vocab, rng, steps, timings)
    truncated = dead and completed < steps
    stats = sorted(timings)
    mean = sum(stats) / len(stats) if stats else 0.0
    return LatencyReport(
        grammar=label,
        vocab_size=len(vocab),
        steps=len(stats),
        mean_us=mean,
        p50_us=_percentile(stats, 0.50),
        p95_us=_percentile(stats, 0.95),
        truncated=truncated,
    )

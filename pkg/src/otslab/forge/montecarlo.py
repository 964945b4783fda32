"""Rejection sampling of transcripts consistent with the adversary's knowledge."""

from __future__ import annotations

import random
from collections import Counter
from fractions import Fraction

from ..oracle import ConsistencyError, RandomTape, SimulatedOracle, query_sort_key, run_traced
from .core import GuessedTranscript, Knowledge, SamplingFailure


def _as_rng(seed) -> random.Random:
    return seed if isinstance(seed, random.Random) else random.Random(seed)


def draw_once(scheme, knowledge: Knowledge, rng: random.Random) -> GuessedTranscript | None:
    """One proposal: a fresh tape and a fresh oracle pinned to the learned pairs.

    Returns the transcript if it reproduces the key and signature, else None.
    """
    oracle = SimulatedOracle(scheme.oracle_kind, rng, fixed=knowledge.table, record=False)
    tape = RandomTape(rng)
    try:
        keys, gen_trace = run_traced(scheme.gen(tape), oracle, "gen")
        if keys.vk != knowledge.vk:
            return None
        sig, sign_trace = run_traced(scheme.sign(keys.sk, knowledge.alpha0), oracle, "sign")
    except ConsistencyError:
        return None
    if sig != knowledge.sigma0:
        return None
    entries = [("gen", q, a) for q, a in gen_trace] + [("sign", q, a) for q, a in sign_trace]
    guessed = {q: a for _, q, a in entries if not knowledge.knows(q)}
    return GuessedTranscript(list(tape.reads), entries, keys, sig, guessed)


def conditional_sample_mc(scheme, knowledge: Knowledge, budget: int, seed) -> GuessedTranscript:
    """First accepted draw within ``budget`` proposals, else :class:`SamplingFailure`."""
    if budget < 1:
        raise ValueError("budget must be at least 1")
    rng = _as_rng(seed)
    for _ in range(budget):
        t = draw_once(scheme, knowledge, rng)
        if t is not None:
            return t
    raise SamplingFailure(budget, 0)


def conditional_samples_mc(scheme, knowledge: Knowledge, count: int, budget: int, seed) -> list[GuessedTranscript]:
    """``count`` accepted draws sharing one proposal budget."""
    rng = _as_rng(seed)
    out: list[GuessedTranscript] = []
    draws = 0
    while len(out) < count:
        if draws >= budget:
            raise SamplingFailure(draws, len(out))
        draws += 1
        t = draw_once(scheme, knowledge, rng)
        if t is not None:
            out.append(t)
    return out


def heavy_query_mc(samples: list[GuessedTranscript], epsilon, knowledge: Knowledge):
    """First unlearned query (canonical order) asked in more than a ``2 epsilon`` fraction of samples."""
    counts: Counter = Counter()
    for t in samples:
        for q in t.queries(["gen", "sign"]):
            if not knowledge.knows(q):
                counts[q] += 1
    threshold = 2 * Fraction(epsilon) * len(samples)
    heavy = [q for q, c in counts.items() if c > threshold]
    return min(heavy, key=query_sort_key) if heavy else None

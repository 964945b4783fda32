"""Full-table brute force over tapes and random-function tables (tiny parameters only).

This is the independent reference for the exact enumerator: it never
reasons symbolically, it just runs Gen and Sign on every tape against
every function table and keeps the consistent combinations.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

from ..bits import Bits
from ..oracle import FixedTape, Plain, RandomFunction, run
from .core import Knowledge


class _Table:
    def __init__(self, kind, table: dict):
        self.kind = kind
        self.table = table
        self.asked: list = []

    def query(self, q, phase=""):
        self.asked.append(q)
        return self.table[q]


def brute_force_posterior(scheme, knowledge: Knowledge, read_lengths: list[int], input_lengths: list[int]):
    """Exact posterior over (tape, table) for a random-function scheme.

    ``read_lengths`` lists the Gen tape reads and ``input_lengths`` the
    lengths of every query input the scheme may ask. Returns a pair
    ``(marginals, tapes)``: the probability that each query is asked by
    Gen or Sign(alpha0), and the distribution of the tape reads.
    """
    kind = scheme.oracle_kind
    if not isinstance(kind, RandomFunction):
        raise ValueError("brute force supports random-function schemes")
    domain = [Plain(Bits(v, n)) for n in input_lengths for v in range(1 << n)]
    if len(domain) * kind.ell > 24 or sum(read_lengths) > 16:
        raise ValueError("parameters too large for full-table brute force")
    fixed = {q: a for q, a in knowledge.table.items() if q in domain}
    free = [q for q in domain if q not in fixed]
    tapes = [
        tuple(Bits(v, n) for v, n in zip(values, read_lengths))
        for values in itertools.product(*(range(1 << n) for n in read_lengths))
    ]
    counts: dict = {}
    tape_counts: dict = {}
    total = 0
    for answers in itertools.product(range(1 << kind.ell), repeat=len(free)):
        table = dict(fixed)
        table.update((q, Bits(a, kind.ell)) for q, a in zip(free, answers))
        oracle = _Table(kind, table)
        for reads in tapes:
            oracle.asked = []
            keys = run(scheme.gen(FixedTape(reads)), oracle, "gen")
            if keys.vk != knowledge.vk:
                continue
            sig = run(scheme.sign(keys.sk, knowledge.alpha0), oracle, "sign")
            if sig != knowledge.sigma0:
                continue
            total += 1
            tape_counts[reads] = tape_counts.get(reads, 0) + 1
            for q in set(oracle.asked):
                counts[q] = counts.get(q, 0) + 1
    if total == 0:
        raise ValueError("no tape and table agree with the knowledge")
    marginals = {q: Fraction(c, total) for q, c in counts.items()}
    posterior = {t: Fraction(c, total) for t, c in tape_counts.items()}
    return marginals, posterior

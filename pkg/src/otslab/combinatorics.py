"""Binomials, entropy, subset ranking and the set-pair (Bollobas-type) bound."""

from __future__ import annotations

import csv
import io
import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


def binom(n: int, k: int) -> int:
    if not 0 <= k <= n:
        raise ValueError(f"binom({n}, {k}) out of range")
    return math.comb(n, k)


def half_binom(q: int) -> int:
    """``C(q, floor(q/2))``, the largest binomial coefficient of order ``q``."""
    return math.comb(q, q // 2)


def binary_entropy(c: float) -> float:
    if not 0.0 < c < 1.0:
        raise ValueError("binary entropy needs 0 < c < 1")
    return -c * math.log2(c) - (1.0 - c) * math.log2(1.0 - c)


def subset_unrank(index: int, k: int, t: int) -> tuple[int, ...]:
    """The ``index``-th ``t``-subset of ``{0..k-1}`` in lexicographic order."""
    total = math.comb(k, t)
    if not 0 <= index < total:
        raise ValueError(f"index {index} out of range for C({k},{t})={total}")
    out = []
    x = 0
    for remaining in range(t, 0, -1):
        while True:
            # subsets starting with x at this position
            block = math.comb(k - x - 1, remaining - 1)
            if index < block:
                out.append(x)
                x += 1
                break
            index -= block
            x += 1
    return tuple(out)


def subset_rank(subset: Iterable[int], k: int) -> int:
    """Inverse of :func:`subset_unrank`."""
    s = sorted(subset)
    t = len(s)
    if len(set(s)) != t or (s and not 0 <= s[0] <= s[-1] < k):
        raise ValueError("not a subset of range(k)")
    rank = 0
    prev = -1
    for pos, x in enumerate(s):
        remaining = t - pos
        for y in range(prev + 1, x):
            rank += math.comb(k - y - 1, remaining - 1)
        prev = x
    return rank


@dataclass
class SetPairFamily:
    universe_size: int
    pairs: list[tuple[frozenset, frozenset]] = field(default_factory=list)

    def __post_init__(self):
        self.pairs = [(frozenset(u), frozenset(v)) for u, v in self.pairs]
        for u, v in self.pairs:
            if any(not 0 <= e < self.universe_size for e in u | v):
                raise ValueError("element outside the universe")

    @property
    def K(self) -> int:
        return len(self.pairs)

    @property
    def q(self) -> int:
        return max((len(u) + len(v) for u, v in self.pairs), default=0)


@dataclass(frozen=True)
class CrossCheck:
    ok: bool
    normalized_ok: bool
    witness: tuple[int, int] | None = None

    def __bool__(self) -> bool:
        return self.ok


def cross_intersecting_check(family: SetPairFamily) -> CrossCheck:
    """Check ``U_i & V_j`` is not contained in ``V_i`` for every ``i != j``.

    Also checks the normalized form (``U_i`` stripped of ``U_i & V_i``):
    ``U_i & V_j`` is empty exactly when ``i == j``. The two agree whenever
    the family is valid.
    """
    pairs = family.pairs
    witness = None
    for i, (ui, vi) in enumerate(pairs):
        for j, (_, vj) in enumerate(pairs):
            if i != j and (ui & vj) <= vi:
                witness = (i, j)
                break
        if witness:
            break
    normalized = [(u - v, v) for u, v in pairs]
    normalized_ok = all(
        (not (ui & vj)) == (i == j)
        for i, (ui, _) in enumerate(normalized)
        for j, (_, vj) in enumerate(normalized)
    )
    return CrossCheck(witness is None, normalized_ok, witness)


def max_family_construct(q: int) -> SetPairFamily:
    """The extremal family: all ``floor(q/2)``-subsets paired with their complements."""
    if q < 2:
        raise ValueError("q must be at least 2")
    universe = frozenset(range(q))
    pairs = [
        (frozenset(s), universe - frozenset(s))
        for s in itertools.combinations(range(q), q // 2)
    ]
    return SetPairFamily(q, pairs)


def _all_pairs(universe: int, q: int) -> list[tuple[frozenset, frozenset]]:
    """Every (U, V) with U, V disjoint, |U|+|V| <= q and V non-empty."""
    out = []
    elems = range(universe)
    for size in range(1, q + 1):
        for members in itertools.combinations(elems, size):
            for vsize in range(1, size + 1):
                for v in itertools.combinations(members, vsize):
                    vs = frozenset(v)
                    out.append((frozenset(members) - vs, vs))
    return out


def _compatible(a, b) -> bool:
    (ua, va), (ub, vb) = a, b
    return bool(ua & vb) and bool(ub & va)


def max_family_exhaustive(q: int, universe: int | None = None) -> int:
    """Largest valid family size by exhaustive clique search.

    Pairs are normalized (U and V disjoint); for normalized pairs the
    condition becomes ``U_i & V_j != {}`` for all ``i != j``, and a pair
    with empty V can belong only to a family of size one.
    """
    universe = q if universe is None else universe
    cand = _all_pairs(universe, q)
    n = len(cand)
    adj = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if _compatible(cand[i], cand[j]):
                adj[i] |= 1 << j
                adj[j] |= 1 << i
    best = 1 if q >= 1 else 0

    def expand(size: int, allowed: int) -> None:
        nonlocal best
        if size > best:
            best = size
        while allowed:
            if size + bin(allowed).count("1") <= best:
                return
            low = allowed & -allowed
            i = low.bit_length() - 1
            allowed ^= low
            expand(size + 1, allowed & adj[i])

    expand(0, (1 << n) - 1)
    return best


@dataclass(frozen=True)
class SearchResult:
    q: int
    best_K: int
    bound: int
    counterexample: SetPairFamily | None = None

    @property
    def violated(self) -> bool:
        return self.best_K > self.bound


def family_bound_search(q: int, attempts: int, seed: int) -> SearchResult:
    """Randomized greedy search for a large valid family in a universe of ``2q`` points.

    Each attempt shuffles the candidate pairs and greedily adds every pair
    compatible with the current family. Exhaustive search is used for
    ``q <= 3`` where it is cheap.
    """
    if q > 6:
        raise ValueError("family_bound_search is limited to q <= 6")
    bound = half_binom(q)
    if q <= 3:
        best = max_family_exhaustive(q, universe=2 * q)
        return SearchResult(q, best, bound)
    cand = _all_pairs(2 * q, q)
    # pairs with |U|+|V| == q dominate smaller ones (a universe of 2q points
    # always leaves room to grow a pair), so only full pairs are searched
    full = [p for p in cand if len(p[0]) + len(p[1]) == q and p[0]]
    umask = np.array([sum(1 << e for e in u) for u, _ in full], dtype=np.int64)
    vmask = np.array([sum(1 << e for e in v) for _, v in full], dtype=np.int64)
    compat = ((umask[:, None] & vmask[None, :]) != 0) & ((umask[None, :] & vmask[:, None]) != 0)
    rng = np.random.default_rng(seed)
    best, best_family = 0, []
    for _ in range(attempts):
        # greedy over a uniformly random order == repeatedly pick a uniform
        # element among the still-compatible pairs
        allowed = np.ones(len(full), dtype=bool)
        chosen = []
        while True:
            idx = np.flatnonzero(allowed)
            if idx.size == 0:
                break
            i = int(idx[rng.integers(idx.size)])
            chosen.append(i)
            allowed &= compat[i]
        if len(chosen) > best:
            best, best_family = len(chosen), [full[i] for i in chosen]
    counter = None
    if best > bound:
        counter = SetPairFamily(2 * q, best_family)
    return SearchResult(q, best, bound, counter)


def random_order_event_rate(u: Sequence[int], v: Sequence[int], universe: Sequence[int], trials: int, seed: int) -> float:
    """Empirical probability that every element of ``u`` precedes every element of ``v``."""
    rng = random.Random(seed)
    order = list(universe)
    us, vs = set(u), set(v)
    hits = 0
    for _ in range(trials):
        rng.shuffle(order)
        last_u = max(i for i, e in enumerate(order) if e in us) if us else -1
        first_v = min(i for i, e in enumerate(order) if e in vs) if vs else len(order)
        hits += last_u < first_v
    return hits / trials


def search_rows_csv(results: Iterable[SearchResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["q", "K_found", "bound"])
    for r in results:
        w.writerow([r.q, r.best_K, r.bound])
    return buf.getvalue()

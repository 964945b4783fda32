"""Constant-query symmetric primitives built from ideal oracles, and their hardness games."""

from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass

from .bits import Bits
from .oracle import (
    BACKWARD,
    FORWARD,
    Cipher,
    IdealCipher,
    Plain,
    RandomFunction,
    RandomPermutation,
)
from .runner import trial_seed

KINDS = ("OWF", "OWP", "CRHF", "PRG", "PRF", "MAC", "BlockCipher", "HardcoreFunction")

# distinct oracle queries per call, by operation
QUERY_COUNTS = {
    "OWF": {"evaluate": 1},
    "OWP": {"evaluate": 1},
    "CRHF": {"evaluate": 1},
    "PRG": {"evaluate": 1},
    "PRF": {"evaluate": 1},
    "MAC": {"tag": 1, "verify": 1},
    "BlockCipher": {"encrypt": 1, "decrypt": 1},
    "HardcoreFunction": {"evaluate": 1, "hardcore": 0},
}


class IncompatibleOracle(ValueError):
    pass


@dataclass
class Primitive:
    """An evaluator for one primitive over ``oracle``; every method asks a constant number of queries."""

    kind: str
    oracle: object
    ell: int

    @property
    def half(self) -> int:
        return self.ell // 2

    def _ask(self, q):
        return self.oracle.query(q, self.kind)

    def evaluate(self, x: Bits, key: Bits | None = None) -> Bits:
        kind = self.kind
        if kind in ("OWF", "OWP", "HardcoreFunction"):
            self._need(x, self.ell)
            return self._ask(Plain(x))
        if kind == "CRHF":
            self._need(x, self.ell)
            return self._ask(Plain(x)).prefix(self.half)
        if kind == "PRG":
            self._need(x, self.half)
            return self._ask(Plain(x + Bits.zeros(self.ell - self.half)))
        if kind == "PRF":
            return self._keyed(key, x)
        if kind == "BlockCipher":
            return self.encrypt(key, x)
        if kind == "MAC":
            return self.tag(key, x)
        raise ValueError(kind)

    def _need(self, x: Bits, length: int) -> None:
        if x.length != length:
            raise ValueError(f"{self.kind} input must have {length} bits")

    def _keyed(self, key: Bits, x: Bits) -> Bits:
        if key is None:
            raise ValueError(f"{self.kind} needs a key")
        return self._ask(Plain(key + x)).prefix(self.ell)

    def tag(self, key: Bits, x: Bits) -> Bits:
        return self._keyed(key, x)

    def verify(self, key: Bits, x: Bits, tag: Bits) -> bool:
        return self._keyed(key, x) == tag

    def encrypt(self, key: Bits, x: Bits) -> Bits:
        return self._ask(Cipher(key, x, FORWARD))

    def decrypt(self, key: Bits, y: Bits) -> Bits:
        return self._ask(Cipher(key, y, BACKWARD))

    def hardcore(self, x: Bits) -> Bits:
        """The first half of the input: pseudorandom given the one-way image."""
        self._need(x, self.ell)
        return x.prefix(self.half)


def build_primitive(kind: str, oracle) -> Primitive:
    if kind not in KINDS:
        raise ValueError(f"unknown primitive {kind!r}")
    ok = {
        "OWP": RandomPermutation,
        "BlockCipher": IdealCipher,
    }.get(kind, RandomFunction)
    if not isinstance(oracle.kind, ok):
        raise IncompatibleOracle(f"{kind} needs a {ok.__name__} oracle, got {oracle.kind.name}")
    return Primitive(kind, oracle, oracle.kind.ell)


# -- games -----------------------------------------------------------------------


class _LazyFunction:
    """A random function with ``ell``-bit answers, sampled on demand (fast path for games)."""

    def __init__(self, ell: int, rng: random.Random):
        self.ell = ell
        self.rng = rng
        self.table: dict[int, int] = {}
        self.queries = 0

    def __call__(self, x: int) -> int:
        y = self.table.get(x)
        if y is None:
            y = self.table[x] = self.rng.getrandbits(self.ell)
            self.queries += 1
        return y


def _distinct_draws(rng: random.Random, size: int, count: int, avoid=()) -> list[int]:
    avoid = set(avoid)
    count = min(count, size - len(avoid))
    if count * 2 > size:
        pool = [v for v in range(size) if v not in avoid]
        rng.shuffle(pool)
        return pool[:count]
    out: list[int] = []
    seen = set(avoid)
    while len(out) < count:
        v = rng.randrange(size)
        if v not in seen:
            seen.add(v)
            out.append(v)
    return out


@dataclass
class GameResult:
    kind: str
    ell: int
    T: int
    trials: int
    value: float
    bound: float
    sigma: float

    @property
    def within(self) -> bool:
        return self.value <= self.bound + 3 * self.sigma


class _LazyPermutation(_LazyFunction):
    """A random permutation of ``ell``-bit strings, sampled on demand."""

    def __init__(self, ell: int, rng: random.Random):
        super().__init__(ell, rng)
        self.used: set[int] = set()

    def __call__(self, x: int) -> int:
        y = self.table.get(x)
        if y is None:
            size = 1 << self.ell
            if len(self.used) * 2 > size:
                y = self.rng.choice([v for v in range(size) if v not in self.used])
            else:
                y = self.rng.randrange(size)
                while y in self.used:
                    y = self.rng.randrange(size)
            self.used.add(y)
            self.table[x] = y
            self.queries += 1
        return y


def inversion_game(ell: int, T: int, trials: int, seed: int, oracle: str = "rp") -> GameResult:
    """Invert ``O(x)`` for random ``x`` with ``T`` queries, then one guess.

    The adversary asks ``T`` distinct random points; if one maps to the
    target it is output, otherwise a fresh unqueried point is guessed.
    A trial wins when the output maps to the target. Over a permutation
    (``oracle="rp"``) that means finding ``x`` itself, with bound
    ``(T+1)/2^ell``. Over a random function (``"rf"``) colliding points
    also win, which adds a second ``(T+1)/2^ell`` term to the bound.
    """
    if T < 0:
        raise ValueError("T must be non-negative")
    if oracle not in ("rp", "rf"):
        raise ValueError(f"unknown oracle {oracle!r}")
    lazy = _LazyPermutation if oracle == "rp" else _LazyFunction
    rng = random.Random(seed)
    size = 1 << ell
    wins = 0
    for _ in range(trials):
        f = lazy(ell, random.Random(rng.getrandbits(64)))
        x = rng.randrange(size)
        y = f(x)
        found = None
        tried = _distinct_draws(rng, size, T)
        for c in tried:
            if f(c) == y:
                found = c
                break
        if found is None:
            rest = _distinct_draws(rng, size, 1, tried)
            found = rest[0] if rest else tried[0]
        wins += f(found) == y
    rate = wins / trials
    terms = 1 if oracle == "rp" else 2
    bound = min(1.0, terms * (T + 1) / size)
    return GameResult("inversion", ell, T, trials, rate, bound, math.sqrt(bound * (1 - bound) / trials))


def _guess_bit(rng: random.Random, hit: bool) -> int:
    return 1 if hit else rng.getrandbits(1)


def distinguishing_game(kind: str, ell: int, T: int, trials: int, seed: int, known_key: bool = False) -> GameResult:
    """Advantage ``P[1 | real] - P[1 | ideal]`` of a query-then-guess distinguisher.

    * ``HardcoreFunction``: given ``(O(x), h)`` with ``h`` the first half of
      ``x`` (real) or random (ideal), query ``h || s`` for ``T`` suffixes.
    * ``PRG``: given ``w``, query ``T`` padded seeds looking for ``w``.
    * ``PRF``: read ``F(0)`` once, then query ``T`` keys ``k' | 0``; with
      ``known_key`` the distinguisher checks the real key directly.

    A hit means output 1; otherwise a random bit (0 with ``known_key``).
    """
    if kind not in ("PRG", "PRF", "HardcoreFunction"):
        raise ValueError(f"no distinguishing game for {kind}")
    rng = random.Random(seed)
    half = ell // 2
    rest = ell - half
    ones = [0, 0]
    for world in (1, 0):
        for _ in range(trials):
            f = _LazyFunction(ell, random.Random(rng.getrandbits(64)))
            if kind == "HardcoreFunction":
                x = rng.getrandbits(ell)
                y = f(x)
                h = x >> rest if world else rng.getrandbits(half)
                hit = any(f((h << rest) | s) == y for s in _distinct_draws(rng, 1 << rest, T))
            elif kind == "PRG":
                s0 = rng.getrandbits(half)
                w = f(s0 << rest) if world else rng.getrandbits(ell)
                hit = any(f(s << rest) == w for s in _distinct_draws(rng, 1 << half, T))
            else:
                key = rng.getrandbits(half)
                if world:
                    t = f(key << rest)
                else:
                    t = rng.getrandbits(ell)
                if known_key:
                    # the key is exposed, so a miss is conclusive
                    ones[world] += f(key << rest) == t
                    continue
                hit = any(f(k << rest) == t for k in _distinct_draws(rng, 1 << half, T))
            ones[world] += _guess_bit(rng, hit)
    adv = (ones[1] - ones[0]) / trials
    bound = 1.0 if known_key else min(1.0, T * 2.0 ** (-half))
    sigma = math.sqrt(0.5 / trials)
    return GameResult(kind, ell, T, trials, adv, bound, sigma)


def games_csv(results: list[GameResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "ell", "T", "trials", "rate_or_advantage", "bound"])
    for r in results:
        w.writerow([r.kind, r.ell, r.T, r.trials, f"{r.value:.6f}", f"{r.bound:.6f}"])
    return buf.getvalue()


def hardness_grid(trials: int, seed: int, ells=(8, 12), budgets=(0, 4, 16)) -> list[GameResult]:
    """Inversion and hard-core games over the seeded grid."""
    out = []
    for ell in ells:
        for T in budgets:
            out.append(inversion_game(ell, T, trials, trial_seed(seed, ell * 1000 + T, "inversion")))
            out.append(distinguishing_game("HardcoreFunction", ell, T, trials, trial_seed(seed, ell * 1000 + T, "hardcore")))
    return out

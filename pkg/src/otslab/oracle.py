"""Seeded, lazily sampled ideal oracles with query ledgers.

Three oracle kinds are supported: a random function (answers of a fixed
length ``ell``), a random permutation (an independent permutation of
``{0,1}^L`` for every input length ``L``) and an ideal cipher (an
independent permutation of ``{0,1}^block`` for every key, queried forwards
or backwards). Every answer is a deterministic function of ``(kind, seed,
query)``; the per-instance table is only a cache.

Signing procedures are written as generators that ``yield`` queries and
receive answers; :func:`run` drives one against any oracle.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Callable, Generator, Iterable, Mapping, Union

from .bits import Bits, Symbol

FORWARD = "F"
BACKWARD = "B"

PERMUTATION_TABLE_MAX_BITS = 16


class QueryKindError(ValueError):
    """A query does not fit the oracle it was sent to."""


class ProtocolViolation(QueryKindError):
    """A query the merged-small-query oracle refuses to answer."""


class ConsistencyError(Exception):
    """An overlay produced two inputs mapping to one output under a permutation."""


# -- queries -----------------------------------------------------------------


@dataclass(frozen=True)
class Plain:
    input: Bits

    kind = "plain"

    def encode(self) -> str:
        return self.input.hex()


@dataclass(frozen=True)
class Cipher:
    key: Bits
    input: Bits
    direction: str = FORWARD

    kind = "cipher"

    def __post_init__(self):
        if self.direction not in (FORWARD, BACKWARD):
            raise ValueError(f"direction must be F or B, got {self.direction!r}")

    def encode(self) -> str:
        return f"{self.key.hex()}/{self.input.hex()}/{self.direction}"

    def dual(self, answer: Bits) -> "Cipher":
        return Cipher(self.key, answer, BACKWARD if self.direction == FORWARD else FORWARD)


@dataclass(frozen=True)
class Merged:
    """One query standing for the whole forward table of ``f_key`` on ``{0,1}^input_length``."""

    key: Bits
    input_length: int

    kind = "merged"

    def encode(self) -> str:
        return f"{self.key.hex()}/{self.input_length}"


Query = Union[Plain, Cipher, Merged]


def query_sort_key(q: Query) -> tuple:
    """Canonical lexicographic order on queries (used for the heavy-query tie-break)."""
    if isinstance(q, Plain):
        return (0, q.input.length, q.input.value)
    if isinstance(q, Cipher):
        return (1, q.key.length, q.key.value, q.input.length, q.input.value, q.direction)
    return (2, q.key.length, q.key.value, q.input_length)


# -- oracle kinds ------------------------------------------------------------


@dataclass(frozen=True)
class RandomFunction:
    ell: int

    name = "random-function"

    def __post_init__(self):
        if self.ell < 1:
            raise ValueError("ell must be >= 1")


@dataclass(frozen=True)
class RandomPermutation:
    ell: int

    name = "random-permutation"

    def __post_init__(self):
        if self.ell < 1:
            raise ValueError("ell must be >= 1")


@dataclass(frozen=True)
class IdealCipher:
    block: int

    name = "ideal-cipher"

    def __post_init__(self):
        if self.block < 1:
            raise ValueError("block length must be >= 1")

    @property
    def ell(self) -> int:
        return self.block


OracleKind = Union[RandomFunction, RandomPermutation, IdealCipher]


def check_query(kind: OracleKind, q: Query) -> None:
    if isinstance(kind, IdealCipher):
        if isinstance(q, Cipher):
            if q.input.length != kind.block:
                raise QueryKindError(f"cipher input must have {kind.block} bits")
            return
        if isinstance(q, Merged):
            return
        raise QueryKindError(f"{type(q).__name__} query sent to an ideal cipher")
    if not isinstance(q, Plain):
        raise QueryKindError(f"{type(q).__name__} query sent to a {kind.name}")


def answer_length(kind: OracleKind, q: Query) -> int:
    if isinstance(q, Merged):
        return (1 << q.input_length) * q.input_length
    if isinstance(kind, RandomFunction):
        return kind.ell
    return q.input.length


def family_of(q: Query) -> tuple:
    """Queries in one family share a permutation (or nothing, for random functions)."""
    if isinstance(q, Plain):
        return ("P", q.input.length)
    if isinstance(q, Cipher):
        return ("C", q.key, q.input.length)
    return ("M", q.key, q.input_length)


# -- ledger ------------------------------------------------------------------


@dataclass(frozen=True)
class LedgerEntry:
    seq: int
    query: Query
    answer: Bits
    phase: str


@dataclass
class QueryLedger:
    entries: list[LedgerEntry] = field(default_factory=list)
    _seen: set = field(default_factory=set, repr=False)
    _seen_by_phase: dict = field(default_factory=dict, repr=False)

    def record(self, query: Query, answer: Bits, phase: str) -> None:
        self.entries.append(LedgerEntry(len(self.entries), query, answer, phase))
        self._seen.add(query)
        self._seen_by_phase.setdefault(phase, set()).add(query)

    @property
    def distinct_count(self) -> int:
        return len(self._seen)

    def queries(self, phases: Iterable[str] | None = None) -> set:
        if phases is None:
            return set(self._seen)
        out: set = set()
        for p in phases:
            out |= self._seen_by_phase.get(p, set())
        return out

    def distinct_in(self, phases: Iterable[str]) -> int:
        return len(self.queries(phases))

    def export(self) -> str:
        lines = [
            f"{e.seq},{e.phase},{e.query.kind},{e.query.encode()},{e.answer.hex()}"
            for e in self.entries
        ]
        return "\n".join(lines) + ("\n" if lines else "")


# -- deterministic answer derivation ----------------------------------------


def _stream_int(seed: int, label: bytes, nbits: int) -> int:
    if nbits == 0:
        return 0
    nbytes = (nbits + 7) // 8
    raw = hashlib.shake_256(seed.to_bytes(8, "big") + label).digest(nbytes)
    return int.from_bytes(raw, "big") >> (8 * nbytes - nbits)


class _Permutation:
    """A pseudorandom permutation of ``{0,1}^bits`` derived from a seed and a label."""

    def __init__(self, seed: int, label: bytes, bits: int):
        self.bits = bits
        self.seed = seed
        self.label = label
        self._forward: list[int] | None = None
        self._inverse: list[int] | None = None
        if bits <= PERMUTATION_TABLE_MAX_BITS:
            rng = random.Random(_stream_int(seed, b"perm|" + label, 64))
            table = list(range(1 << bits))
            rng.shuffle(table)
            self._forward = table

    def forward(self, x: int) -> int:
        if self._forward is not None:
            return self._forward[x]
        return self._feistel(x, inverse=False)

    def backward(self, y: int) -> int:
        if self._forward is not None:
            if self._inverse is None:
                inv = [0] * len(self._forward)
                for i, v in enumerate(self._forward):
                    inv[v] = i
                self._inverse = inv
            return self._inverse[y]
        return self._feistel(y, inverse=True)

    # Large domains: 8-round balanced Feistel on an even width, cycle-walking
    # down to odd widths.
    def _feistel(self, x: int, inverse: bool) -> int:
        width = self.bits + (self.bits & 1)
        while True:
            x = self._feistel_once(x, width, inverse)
            if x >> self.bits == 0:
                return x

    def _feistel_once(self, x: int, width: int, inverse: bool) -> int:
        half = width // 2
        mask = (1 << half) - 1
        left, right = x >> half, x & mask
        rounds = range(7, -1, -1) if inverse else range(8)
        for r in rounds:
            if inverse:
                left, right = right ^ self._round(r, left, half), left
            else:
                left, right = right, left ^ self._round(r, right, half)
        return (left << half) | right

    def _round(self, r: int, v: int, half: int) -> int:
        return _stream_int(self.seed, b"feistel|" + self.label + bytes([r]) + v.to_bytes(8, "big"), half)


class OracleInstance:
    """A seeded ideal oracle with a query ledger.

    Two instances built from the same ``(kind, seed)`` answer every query
    sequence identically. Answers never change once given.
    """

    def __init__(self, kind: OracleKind, seed: int):
        self.kind = kind
        self.seed = seed & 0xFFFFFFFFFFFFFFFF
        self.table: dict[Query, Bits] = {}
        self.ledger = QueryLedger()
        self._perms: dict[tuple, _Permutation] = {}

    def __repr__(self) -> str:
        return f"OracleInstance({self.kind}, seed={self.seed})"

    def query(self, q: Query, phase: str = "") -> Bits:
        ans = self.table.get(q)
        if ans is None:
            check_query(self.kind, q)
            ans = self._derive(q)
            self.table[q] = ans
            if isinstance(q, Cipher):
                self.table.setdefault(q.dual(ans), q.input)
        self.ledger.record(q, ans, phase)
        return ans

    def peek(self, q: Query) -> Bits:
        """The answer to ``q`` without recording it (harness use only)."""
        ans = self.table.get(q)
        if ans is None:
            check_query(self.kind, q)
            ans = self._derive(q)
        return ans

    def _perm(self, label: tuple, bits: int) -> _Permutation:
        perm = self._perms.get(label)
        if perm is None:
            perm = _Permutation(self.seed, repr(label).encode(), bits)
            self._perms[label] = perm
        return perm

    def _derive(self, q: Query) -> Bits:
        kind = self.kind
        if isinstance(kind, RandomFunction):
            return Bits(_stream_int(self.seed, b"rf|" + q.encode().encode(), kind.ell), kind.ell)
        if isinstance(kind, RandomPermutation):
            n = q.input.length
            return Bits(self._perm(("rp", n), n).forward(q.input.value), n)
        if isinstance(q, Merged):
            perm = self._perm(("ic", q.key.hex(), q.input_length), q.input_length)
            n = q.input_length
            value = 0
            for x in range(1 << n):
                value = (value << n) | perm.forward(x)
            return Bits(value, (1 << n) * n)
        perm = self._perm(("ic", q.key.hex(), kind.block), kind.block)
        if q.direction == FORWARD:
            return Bits(perm.forward(q.input.value), kind.block)
        return Bits(perm.backward(q.input.value), kind.block)


def new_oracle(kind: OracleKind, seed: int) -> OracleInstance:
    return OracleInstance(kind, seed)


# -- simulated oracles (fresh randomness, optional fixed pairs) --------------


class _FamilyState:
    """Forward/backward maps of one permutation family, for without-replacement sampling."""

    __slots__ = ("fwd", "bwd", "width")

    def __init__(self, width: int):
        self.fwd: dict[int, int] = {}
        self.bwd: dict[int, int] = {}
        self.width = width

    def add(self, x: int, y: int) -> None:
        if self.fwd.get(x, y) != y or self.bwd.get(y, x) != x:
            raise ConsistencyError(f"pair {x}->{y} conflicts with the family")
        self.fwd[x] = y
        self.bwd[y] = x

    def fresh(self, rng: random.Random, used: dict[int, int]) -> int:
        size = 1 << self.width
        if len(used) >= size:
            raise ConsistencyError("permutation family exhausted")
        if len(used) * 2 < size:
            while True:
                v = rng.getrandbits(self.width) if self.width else 0
                if v not in used:
                    return v
        free = [v for v in range(size) if v not in used]
        return free[rng.randrange(len(free))]


class SimulatedOracle:
    """An oracle sampled lazily from a private RNG, optionally pinned on some queries.

    Used by the rejection sampler (a fresh oracle agreeing with the learned
    pairs) and by the hybrid harness (fresh random answers).
    """

    def __init__(self, kind: OracleKind, rng: random.Random, fixed: Mapping[Query, Bits] | None = None, record: bool = True):
        self.kind = kind
        self.rng = rng
        self.table: dict[Query, Bits] = {}
        self.ledger = QueryLedger()
        self.record = record
        self._families: dict[tuple, _FamilyState] = {}
        for q, a in (fixed or {}).items():
            self._store(q, a)

    def _family(self, q: Query) -> _FamilyState | None:
        if isinstance(q, Merged):
            return None
        if isinstance(self.kind, RandomFunction):
            return None
        fam = family_of(q)
        st = self._families.get(fam)
        if st is None:
            st = self._families[fam] = _FamilyState(q.input.length)
        return st

    def _store(self, q: Query, a: Bits) -> None:
        old = self.table.get(q)
        if old is not None:
            if old != a:
                raise ConsistencyError(f"two answers for {q}")
            return
        fam = self._family(q)
        if fam is not None:
            if isinstance(q, Cipher) and q.direction == BACKWARD:
                fam.add(a.value, q.input.value)
            else:
                fam.add(q.input.value, a.value)
        self.table[q] = a
        if isinstance(q, Cipher):
            self.table.setdefault(q.dual(a), q.input)

    def sample_answer(self, q: Query) -> Bits:
        """Draw a fresh answer for an unanswered query (without recording it)."""
        check_query(self.kind, q)
        length = answer_length(self.kind, q)
        if isinstance(q, Merged):
            table = list(range(1 << q.input_length))
            self.rng.shuffle(table)
            value = 0
            for v in table:
                value = (value << q.input_length) | v
            return Bits(value, length)
        fam = self._family(q)
        if fam is None:
            return Bits(self.rng.getrandbits(length) if length else 0, length)
        if isinstance(q, Cipher) and q.direction == BACKWARD:
            return Bits(fam.fresh(self.rng, fam.fwd), length)
        return Bits(fam.fresh(self.rng, fam.bwd), length)

    def query(self, q: Query, phase: str = "") -> Bits:
        ans = self.table.get(q)
        if ans is None:
            ans = self.sample_answer(q)
            self._store(q, ans)
        if self.record:
            self.ledger.record(q, ans, phase)
        return ans


# -- overlay -----------------------------------------------------------------


def _check_guess_consistency(kind: OracleKind, guesses: Mapping[Query, Bits]) -> dict[Query, Bits]:
    """Close the guesses under cipher duality and reject permutation conflicts."""
    closed: dict[Query, Bits] = {}
    for q, a in guesses.items():
        check_query(kind, q)
        for qq, aa in ((q, a), (q.dual(a), q.input)) if isinstance(q, Cipher) else ((q, a),):
            if qq in closed and closed[qq] != aa:
                raise ConsistencyError(f"inconsistent guesses for {qq}")
            closed[qq] = aa
    if not isinstance(kind, RandomFunction):
        seen: dict[tuple, Query] = {}
        for q, a in closed.items():
            if isinstance(q, Merged):
                continue
            slot = (family_of(q), getattr(q, "direction", FORWARD), a)
            if slot in seen and seen[slot] != q:
                raise ConsistencyError(f"guesses {seen[slot]} and {q} share an answer")
            seen[slot] = q
    return closed


class OverlayOracle:
    """Answers guessed queries from ``guesses`` and forwards the rest to ``base``.

    For permutation and cipher oracles a forwarded answer that collides
    with a guessed answer in the same family raises :class:`ConsistencyError`.
    """

    def __init__(self, guesses: Mapping[Query, Bits], base):
        self.base = base
        self.kind = base.kind
        self.guesses = _check_guess_consistency(self.kind, guesses)
        self._guessed_outputs: dict[tuple, Query] = {}
        if not isinstance(self.kind, RandomFunction):
            for q, a in self.guesses.items():
                if not isinstance(q, Merged):
                    self._guessed_outputs[(family_of(q), getattr(q, "direction", FORWARD), a)] = q

    def query(self, q: Query, phase: str = "") -> Bits:
        if q in self.guesses:
            return self.guesses[q]
        ans = self.base.query(q, phase)
        if self._guessed_outputs and not isinstance(q, Merged):
            slot = (family_of(q), getattr(q, "direction", FORWARD), ans)
            other = self._guessed_outputs.get(slot)
            if other is not None and other != q:
                raise ConsistencyError(f"{q} and guessed {other} both map to {ans}")
        return ans


def overlay(guesses: Mapping[Query, Bits], base) -> OverlayOracle:
    return OverlayOracle(guesses, base)


# -- merged small queries ----------------------------------------------------


def merge_threshold(q: int) -> int:
    """Input length below which cipher queries are merged: ``2(q + ceil(log2 q))``."""
    return 2 * (q + max(q - 1, 0).bit_length())


class MergedSmallQueryOracle:
    """An ideal cipher that only answers long cipher queries and whole-table queries.

    Cipher queries with input shorter than the threshold are refused;
    ``Merged(k, n)`` for ``n`` below the threshold returns the concatenation
    of the forward answers on all of ``{0,1}^n`` in lexicographic order.
    """

    def __init__(self, base: OracleInstance, q: int):
        if not isinstance(base.kind, IdealCipher):
            raise QueryKindError("merged oracle needs an ideal cipher base")
        self.base = base
        self.kind = base.kind
        self.threshold = merge_threshold(q)
        self.ledger = QueryLedger()
        self._cache: dict[Query, Bits] = {}

    def query(self, q: Query, phase: str = "") -> Bits:
        if isinstance(q, Merged):
            if q.input_length >= self.threshold:
                raise ProtocolViolation(f"merged query of length {q.input_length} >= {self.threshold}")
            ans = self._cache.get(q)
            if ans is None:
                ans = self.base.query(q, phase)
                self._cache[q] = ans
        elif isinstance(q, Cipher):
            if q.input.length < self.threshold:
                raise ProtocolViolation(
                    f"cipher query of length {q.input.length} below threshold {self.threshold}"
                )
            ans = self.base.query(q, phase)
        else:
            raise QueryKindError("plain query sent to a merged cipher oracle")
        self.ledger.record(q, ans, phase)
        return ans


def merged_small_query_oracle(base: OracleInstance, q: int) -> MergedSmallQueryOracle:
    return MergedSmallQueryOracle(base, q)


def merged_lookup(table: Bits, n: int, x: Bits, direction: str) -> Bits:
    """Evaluate ``f_k`` (or its inverse) from a merged-query answer."""
    size = 1 << n
    if table.length != size * n:
        raise ValueError("merged table has the wrong length")
    mask = size - 1
    if direction == FORWARD:
        return Bits((table.value >> (n * (mask - x.value))) & mask, n)
    target = x.value
    v = table.value
    for i in range(size):
        if (v >> (n * (mask - i))) & mask == target:
            return Bits(i, n)
    raise ConsistencyError("value missing from merged table")


# -- procedures --------------------------------------------------------------

Procedure = Generator[Query, Bits, object]


def run(proc: Procedure, oracle, phase: str = ""):
    """Drive a procedure generator against an oracle and return its result."""
    try:
        q = next(proc)
        while True:
            q = proc.send(oracle.query(q, phase))
    except StopIteration as stop:
        return stop.value


def run_traced(proc: Procedure, oracle, phase: str = "") -> tuple[object, list[tuple[Query, Bits]]]:
    """Like :func:`run`, also returning the ordered query/answer pairs."""
    trace: list[tuple[Query, Bits]] = []
    try:
        q = next(proc)
        while True:
            a = oracle.query(q, phase)
            trace.append((q, a))
            q = proc.send(a)
    except StopIteration as stop:
        return stop.value, trace


def wrap_redundant_dual(proc: Procedure) -> Procedure:
    """After every cipher query ``(k,x,d) -> y`` also ask the dual ``(k,y,d')``."""
    try:
        q = next(proc)
        while True:
            a = yield q
            if isinstance(q, Cipher):
                yield q.dual(a)
            q = proc.send(a)
    except StopIteration as stop:
        return stop.value


# -- random tapes ------------------------------------------------------------


class RandomTape:
    """Reads fresh uniform bits from an RNG and remembers them."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.reads: list[Bits] = []

    def read(self, n: int) -> Bits:
        b = Bits(self.rng.getrandbits(n) if n else 0, n)
        self.reads.append(b)
        return b

    @property
    def consumed(self) -> Bits:
        out = Bits(0, 0)
        for r in self.reads:
            out = out + r
        return out


class FixedTape:
    """Replays a recorded sequence of reads (or one flat bit string)."""

    def __init__(self, reads: Iterable[Bits] | Bits):
        if isinstance(reads, Bits):
            self._flat: Bits | None = reads
            self._reads: list[Bits] = []
        else:
            self._flat = None
            self._reads = list(reads)
        self._pos = 0
        self.reads: list[Bits] = []

    def read(self, n: int) -> Bits:
        if self._flat is not None:
            if self._pos + n > self._flat.length:
                raise ValueError("tape exhausted")
            b = self._flat.slice(self._pos, self._pos + n)
            self._pos += n
        else:
            if self._pos >= len(self._reads):
                raise ValueError("tape exhausted")
            b = self._reads[self._pos]
            if b.length != n:
                raise ValueError(f"tape read of {n} bits replayed with {b.length}")
            self._pos += 1
        self.reads.append(b)
        return b


def is_concrete(value) -> bool:
    if isinstance(value, Symbol):
        return False
    if isinstance(value, tuple):
        return all(is_concrete(v) for v in value)
    return True


AnswerFn = Callable[[Query], Bits]

"""Attack parameters and the records passed between the attack's steps."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from ..bits import Bits
from ..combinatorics import half_binom
from ..oracle import BACKWARD, Cipher, Query


class CapacityError(RuntimeError):
    """The exact enumerator would exceed its branch cap."""


class SamplingFailure(RuntimeError):
    """The rejection sampler ran out of budget."""

    def __init__(self, draws: int, accepted: int):
        self.draws = draws
        self.accepted = accepted
        self.acceptance_estimate = accepted / draws if draws else 0.0
        super().__init__(f"no acceptable transcript in {draws} draws (acceptance ~ {self.acceptance_estimate:.3g})")


EXACT = "exact"
MONTE_CARLO = "mc"


@dataclass(frozen=True)
class AttackParams:
    q: int
    n: int
    N: int
    lam: Fraction
    delta: Fraction
    epsilon: Fraction
    M: int
    backend: str = EXACT
    branch_cap: int = 20000
    mc_samples: int = 400
    rejection_budget: int = 200000
    early_exit: bool = True
    profile: str = "corollary"
    # imperfect-completeness settings (unused otherwise)
    verify_runs: int = 0
    test_runs: int = 0
    heavy_fraction: Fraction = Fraction(0)
    pass_fraction: Fraction = Fraction(3, 4)
    caps: tuple = ()

    @property
    def query_bound(self) -> int:
        """The explicit bound ``M + qN`` on distinct adversary queries."""
        return self.M + self.q * self.N

    @property
    def loose_query_bound(self) -> Fraction:
        return 2 * self.q * self.q * self.N / (self.delta * self.delta)

    def mc_sample_formula(self, ell: int | None = None) -> int:
        """Samples per heavy-query estimate: ``(ell + log M - log delta) / epsilon^2``.

        ``ell`` is the oracle answer length; it defaults to ``q`` when unknown.
        """
        ell = self.q if ell is None else ell
        val = (ell + math.log2(self.M) - math.log2(self.delta)) / float(self.epsilon) ** 2
        return math.ceil(val)


def _derived(q: int, N: int, lam: Fraction, delta: Fraction, scale: int = 1) -> tuple[Fraction, int]:
    eps = delta / (q * N * scale)
    M = math.ceil(Fraction(q) / (eps * delta))
    return eps, M


def default_params(scheme, n: int | None = None, profile: str = "corollary", lam=None, delta=None, **overrides) -> AttackParams:
    """Attack parameters for ``scheme``.

    ``corollary`` sets ``lam = delta = C(q, q//2) / 2^q`` and ``N = 2^q``;
    ``custom`` takes ``lam`` and ``delta`` and sets ``N = ceil(C(q, q//2) / lam)``.
    """
    q = scheme.budgets.total
    n = scheme.message_bits if n is None else n
    if profile == "corollary":
        lam = delta = Fraction(half_binom(q), 2**q)
        N = 2**q
    elif profile == "custom":
        if lam is None or delta is None:
            raise ValueError("custom profile needs lam and delta")
        lam, delta = Fraction(lam), Fraction(delta)
        if not (0 < lam <= 1 and 0 < delta < 1):
            raise ValueError("lam and delta must lie in (0, 1)")
        N = math.ceil(half_binom(q) / lam)
    else:
        raise ValueError(f"unknown profile {profile!r}")
    if N > 2**n:
        raise ValueError(f"N={N} messages do not fit in {n}-bit message space")
    eps, M = _derived(q, N, lam, delta)
    return AttackParams(q, n, N, lam, delta, eps, M, profile=profile, **overrides)


def imperfect_params(scheme, n: int | None = None, max_N: int = 32, max_verify_runs: int = 100, max_test_runs: int | None = None, **overrides) -> AttackParams:
    """Parameters for the randomized-verifier attack, reduced to desk scale.

    The full values are ``r = 20q^2``, ``N = 2^r``, ``m = 20^3 q^4`` and
    ``q^3`` test runs; each cap that bites is recorded in ``caps``.
    """
    q = scheme.budgets.total
    n = scheme.message_bits if n is None else n
    r = 20 * q * q
    caps = []
    r_used = r
    if 2**r > min(max_N, 2**n):
        r_used = min(max_N, 2**n).bit_length() - 1
        caps.append(("r", r, r_used))
    N = 2**r_used
    lam = delta = Fraction(half_binom(r_used), 2**r_used)
    m = 20**3 * q**4
    if m > max_verify_runs:
        caps.append(("m", m, max_verify_runs))
        m = max_verify_runs
    tests = q**3
    if max_test_runs is not None and tests > max_test_runs:
        caps.append(("tests", tests, max_test_runs))
        tests = max_test_runs
    eps = delta / (m * q * N)
    M = math.ceil(Fraction(q) / (eps * delta))
    return AttackParams(
        q, n, N, lam, delta, eps, M,
        profile="imperfect",
        verify_runs=m,
        test_runs=tests,
        heavy_fraction=Fraction(1, 20 * q),
        caps=tuple(caps),
        **overrides,
    )


def message_schedule(n: int, N: int, rng: random.Random | int) -> list[Bits]:
    """A uniformly random ordering of the first ``N`` messages of ``{0,1}^n``."""
    if N > 2**n:
        raise ValueError("N exceeds the message space")
    if not isinstance(rng, random.Random):
        rng = random.Random(rng)
    order = list(range(N))
    rng.shuffle(order)
    return [Bits(v, n) for v in order]


# -- records -----------------------------------------------------------------


def _closure(pairs: dict) -> dict:
    out = dict(pairs)
    for q, a in pairs.items():
        if isinstance(q, Cipher):
            out.setdefault(q.dual(a), q.input)
    return out


@dataclass
class Knowledge:
    """What the adversary knows: the key, the signed message and its signature, and learned pairs."""

    vk: tuple
    alpha0: Bits
    sigma0: tuple
    learned: dict = field(default_factory=dict)
    v0: frozenset = frozenset()

    def __post_init__(self):
        self._table = _closure(self.learned)

    @property
    def table(self) -> dict:
        """Learned pairs closed under cipher duality."""
        return self._table

    def knows(self, q: Query) -> bool:
        return q in self._table

    def add(self, q: Query, a: Bits) -> None:
        old = self._table.get(q)
        if old is not None and old != a:
            raise ValueError(f"conflicting answers for {q}")
        self.learned[q] = a
        self._table[q] = a
        if isinstance(q, Cipher):
            self._table.setdefault(q.dual(a), q.input)

    def copy(self) -> "Knowledge":
        return Knowledge(self.vk, self.alpha0, self.sigma0, dict(self.learned), self.v0)


@dataclass
class Transcript:
    """Gen tape reads plus the ordered query/answer entries of Gen, Sign(alpha0) and Ver."""

    tape: list
    entries: list  # (phase, query, answer)
    keys: object
    sigma0: tuple

    def queries(self, phases: Iterable[str] | None = None) -> set:
        if phases is None:
            return {q for _, q, _ in self.entries}
        phases = set(phases)
        return {q for p, q, _ in self.entries if p in phases}

    @property
    def G(self) -> set:
        return self.queries(["gen"])

    @property
    def S0(self) -> set:
        return self.queries(["sign"])

    @property
    def V0(self) -> set:
        return self.queries(["ver"])

    @property
    def pairs(self) -> dict:
        return {q: a for _, q, a in self.entries}


@dataclass
class GuessedTranscript(Transcript):
    guessed: dict = field(default_factory=dict)

    @property
    def sk(self):
        return self.keys.sk


@dataclass
class AttackOutcome:
    success: bool
    message: Bits | None = None
    signature: tuple | None = None
    queries: int = 0
    per_phase: dict = field(default_factory=dict)
    learned: int = 0
    useful_index: int | None = None
    accepted_index: int | None = None
    alpha0: Bits | None = None
    failure: str | None = None
    notes: dict = field(default_factory=dict)


def query_side(q: Query) -> str:
    return BACKWARD if isinstance(q, Cipher) and q.direction == BACKWARD else "F"

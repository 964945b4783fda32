"""One-time signature schemes over ideal oracles.

Every scheme exposes three procedures written as generators (see
:func:`otslab.oracle.run`): ``gen(tape)`` returns a :class:`KeyPair`,
``sign(sk, message)`` returns a signature and ``verify(vk, message, sig)``
returns a bool. Keys and signatures are tuples of :class:`Bits`. Only key
generation reads a random tape; signing is deterministic, and verification
is deterministic unless the scheme declares a randomized verifier.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Any

from .bits import Bits, concat
from .combinatorics import binary_entropy, binom, subset_unrank
from .oracle import (
    BACKWARD,
    FORWARD,
    Cipher,
    ConsistencyError,
    FixedTape,
    IdealCipher,
    Merged,
    OracleKind,
    Plain,
    RandomFunction,
    RandomPermutation,
    RandomTape,
    merge_threshold,
    merged_lookup,
    new_oracle,
    run,
    wrap_redundant_dual,
)

ANTICHAIN_C = (3 - math.sqrt(5)) / 2
# exponent quoted for the antichain construction; reported, never asserted
STATED_EXPONENT = 0.812

# Key under which cipher-based schemes encrypt their secrets; message hashes
# use the message itself as the key, so the two never share a permutation.
SECRET_KEY = Bits(0, 0)


@dataclass(frozen=True)
class Budgets:
    gen: int
    sign: int
    ver: int
    total: int
    v: int


@dataclass(frozen=True)
class KeyPair:
    sk: tuple
    vk: tuple


def flatten(parts) -> Bits:
    """Canonical fixed-width encoding of a key or signature."""
    return concat(parts)


def _nothing():
    return
    yield  # pragma: no cover


class Scheme:
    """Base class; subclasses implement the three procedures."""

    name = "scheme"
    randomized_verifier = False
    coin_bits = 0

    message_bits: int
    oracle_kind: OracleKind
    tape_bits: int
    budgets: Budgets

    def params(self) -> dict[str, Any]:
        raise NotImplementedError

    def gen(self, tape):
        raise NotImplementedError

    def sign(self, sk, message):
        raise NotImplementedError

    def verify(self, vk, message, sig, coins=None):
        raise NotImplementedError

    @property
    def q(self) -> int:
        return self.budgets.total

    @property
    def ell(self) -> int:
        return self.oracle_kind.ell

    def descriptor(self) -> str:
        lines = [f"name={self.name}"] + [f"{k}={v}" for k, v in self.params().items()]
        return "\n".join(lines) + "\n"

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


# -- Lamport family ----------------------------------------------------------


class _LamportBase(Scheme):
    """Shared machinery: secrets are read from the tape and the key holds their images."""

    primitive: str

    def _kind(self, ell: int) -> OracleKind:
        if self.primitive == "rf":
            return RandomFunction(ell)
        if self.primitive == "rp":
            return RandomPermutation(ell)
        if self.primitive == "ic":
            return IdealCipher(ell)
        raise ValueError(f"unknown primitive {self.primitive!r}")

    def _image(self, x):
        return Cipher(SECRET_KEY, x, FORWARD) if self.primitive == "ic" else Plain(x)

    def _gen_secrets(self, tape, count: int, width: int):
        sk, vk = [], []
        for _ in range(count):
            x = tape.read(width)
            sk.append(x)
            vk.append((yield self._image(x)))
        return KeyPair(tuple(sk), tuple(vk))

    def _check_images(self, vk, sig, indices, width: int):
        for x, idx in zip(sig, indices):
            if not isinstance(x, Bits) or x.length != width:
                return False
            if (yield self._image(x)) != vk[idx]:
                return False
        return True


class LamportScheme(_LamportBase):
    name = "lamport"

    def __init__(self, n: int, ell: int, primitive: str = "rf"):
        if n < 1 or ell < 1:
            raise ValueError("n and ell must be positive")
        self.n = n
        self.primitive = primitive
        self.message_bits = n
        self.oracle_kind = self._kind(ell)
        self.tape_bits = 2 * n * ell
        self.budgets = Budgets(2 * n, 0, n, 3 * n, n)

    def params(self):
        return {"n": self.n, "ell": self.ell, "primitive": self.primitive}

    def gen(self, tape):
        return (yield from self._gen_secrets(tape, 2 * self.n, self.ell))

    def sign(self, sk, message: Bits):
        yield from _nothing()
        return tuple(sk[2 * i + message.bit(i)] for i in range(self.n))

    def verify(self, vk, message: Bits, sig, coins=None):
        if not isinstance(sig, tuple) or len(sig) != self.n or message.length != self.n:
            return False
        indices = [2 * i + message.bit(i) for i in range(self.n)]
        return (yield from self._check_images(vk, sig, indices, self.ell))


class HashAndSignScheme(_LamportBase):
    """Lamport signing of the first ``k`` bits of the oracle's answer on the message."""

    name = "hash-and-sign"

    def __init__(self, k: int, ell: int, n: int, primitive: str = "rf"):
        if k < 1 or n < 1 or ell < 1:
            raise ValueError("k, ell and n must be positive")
        self.k = k
        self.n = n
        self.primitive = primitive
        self.message_bits = n
        self.oracle_kind = self._kind(ell)
        if primitive == "rf" and ell < k:
            raise ValueError("oracle answers shorter than the hash")
        if primitive == "rp" and n < k:
            raise ValueError("permutation answers on n-bit messages are shorter than the hash")
        self.tape_bits = 2 * k * ell
        self.budgets = Budgets(2 * k, 1, k + 1, 3 * k + 2, k + 1)

    def params(self):
        return {"k": self.k, "ell": self.ell, "n": self.n, "primitive": self.primitive}

    def _hash_query(self, message: Bits):
        if self.primitive == "ic":
            return Cipher(message, Bits.zeros(self.ell), FORWARD)
        return Plain(message)

    def digest(self, message: Bits):
        h = yield self._hash_query(message)
        return h.prefix(self.k)

    def gen(self, tape):
        return (yield from self._gen_secrets(tape, 2 * self.k, self.ell))

    def sign(self, sk, message: Bits):
        d = yield from self.digest(message)
        return tuple(sk[2 * i + d.bit(i)] for i in range(self.k))

    def verify(self, vk, message: Bits, sig, coins=None):
        if not isinstance(sig, tuple) or len(sig) != self.k or message.length != self.n:
            return False
        d = yield from self.digest(message)
        indices = [2 * i + d.bit(i) for i in range(self.k)]
        return (yield from self._check_images(vk, sig, indices, self.ell))


class CoinFlipScheme(HashAndSignScheme):
    """Hash-and-sign whose verifier asks one query on fresh coins and rejects on all-zero coins.

    Honest signatures are accepted with probability ``1 - 2**-coin_bits``
    over the verifier's coins, for every oracle.
    """

    name = "coin-flip"
    randomized_verifier = True

    def __init__(self, k: int, ell: int, n: int, coin_bits: int = 4):
        if coin_bits in (ell, n):
            raise ValueError("coin queries must not share a length with secrets or messages")
        super().__init__(k, ell, n, "rf")
        self.coin_bits = coin_bits
        self.budgets = Budgets(2 * k, 1, k + 2, 3 * k + 3, k + 2)

    def params(self):
        return {"k": self.k, "ell": self.ell, "n": self.n, "coin_bits": self.coin_bits}

    @property
    def honest_acceptance(self) -> float:
        return 1 - 2.0 ** -self.coin_bits

    def verify(self, vk, message: Bits, sig, coins=None):
        if coins is None:
            raise ValueError("the coin-flip verifier needs a coin tape")
        r = coins.read(self.coin_bits)
        yield Plain(r)
        if r.value == 0:
            return False
        return (yield from super().verify(vk, message, sig))


# -- antichain scheme --------------------------------------------------------


@dataclass(frozen=True)
class AntichainParams:
    k: int
    t: int
    hash_bits: int
    q_total: int
    uniform_lengths: bool = False
    c: float = field(default=ANTICHAIN_C)

    @classmethod
    def for_k(cls, k: int, t: int | None = None, uniform_lengths: bool = False) -> "AntichainParams":
        if t is None:
            t = round_half_down(ANTICHAIN_C * k)
        t = min(max(t, 1), k - 1)
        return cls(k, t, binom(k, t).bit_length() - 1, (k + 1) + 1 + (t + 2), uniform_lengths)

    def secret_len(self, i: int) -> int:
        return self.q_total if self.uniform_lengths else self.q_total + i

    def secret_len_index(self, length: int) -> int:
        """Index of the secret with the given length (distinct lengths only)."""
        if self.uniform_lengths:
            raise ValueError("uniform lengths do not identify secrets")
        return length - self.q_total

    @property
    def salt_len(self) -> int:
        return 2 * self.q_total

    @property
    def security_scale(self) -> int:
        return binom(self.k, self.t)


def round_half_down(x: float) -> int:
    f = math.floor(x)
    return f + 1 if x - f > 0.5 else f


class AntichainScheme(Scheme):
    """Lamport over incomparable ``t``-subsets of ``k`` secrets, salted by a secret ``z``.

    The key holds the images of ``x_0..x_{k-1}`` and of ``z``. A message
    selects the subset indexed by the first ``hash_bits`` bits of the
    oracle's answer on ``z || message``; the signature reveals those
    secrets and ``z``.
    """

    name = "antichain"

    def __init__(self, k: int, n: int, ell: int | None = None, t: int | None = None, uniform_lengths: bool = False):
        if k < 3:
            raise ValueError("antichain scheme needs k >= 3")
        if n < 1:
            raise ValueError("n must be positive")
        self.n = n
        self.message_bits = n
        self.ap = AntichainParams.for_k(k, t, uniform_lengths)
        if self.ap.hash_bits < 1:
            raise ValueError("k too small for a one-bit hash")
        ell = 2 * self.ap.q_total if ell is None else ell
        if ell < self.ap.hash_bits:
            raise ValueError("answers shorter than the subset index")
        self.oracle_kind = RandomFunction(ell)
        self.tape_bits = sum(self.ap.secret_len(i) for i in range(k)) + self.ap.salt_len
        ap = self.ap
        self.budgets = Budgets(k + 1, 1, ap.t + 2, ap.q_total, ap.t + 2)

    @property
    def k(self) -> int:
        return self.ap.k

    @property
    def t(self) -> int:
        return self.ap.t

    def params(self):
        out = {"k": self.k, "n": self.n, "ell": self.ell}
        if self.ap.uniform_lengths:
            out["uniform_lengths"] = 1
        return out

    def security_report(self) -> dict:
        """Measured security scale next to the two candidate asymptotic exponents.

        ``stated_exponent`` is the value quoted for this construction;
        ``entropy_exponent`` evaluates ``H(c)/(1+c)`` directly, which gives
        about 0.694 rather than 0.812.
        """
        scale = binom(self.k, self.t)
        return {
            "scale": scale,
            "measured_exponent": math.log2(scale) / self.budgets.total,
            "entropy_exponent": binary_entropy(ANTICHAIN_C) / (1 + ANTICHAIN_C),
            "stated_exponent": STATED_EXPONENT,
        }

    def subset(self, answer: Bits) -> tuple[int, ...]:
        return subset_unrank(answer.prefix(self.ap.hash_bits).to_int(), self.k, self.t)

    def gen(self, tape):
        xs, images = [], []
        for i in range(self.k):
            x = tape.read(self.ap.secret_len(i))
            xs.append(x)
            images.append((yield Plain(x)))
        z = tape.read(self.ap.salt_len)
        images.append((yield Plain(z)))
        return KeyPair(tuple(xs) + (z,), tuple(images))

    def sign(self, sk, message: Bits):
        z = sk[self.k]
        a = yield Plain(z + message)
        return tuple(sk[i] for i in self.subset(a)) + (z,)

    def verify(self, vk, message: Bits, sig, coins=None):
        if not isinstance(sig, tuple) or len(sig) != self.t + 1 or message.length != self.n:
            return False
        z = sig[-1]
        if not isinstance(z, Bits) or z.length != self.ap.salt_len:
            return False
        if (yield Plain(z)) != vk[self.k]:
            return False
        subset = self.subset((yield Plain(z + message)))
        for x, i in zip(sig, subset):
            if not isinstance(x, Bits) or x.length != self.ap.secret_len(i):
                return False
            if (yield Plain(x)) != vk[i]:
                return False
        return True


class TradeoffScheme(AntichainScheme):
    """The antichain scheme revealing ``v - 2`` secrets so that verification asks ``v`` queries."""

    name = "tradeoff"

    def __init__(self, k: int, v: int, n: int, ell: int | None = None):
        if v < 3 or v - 2 > k - 1:
            raise ValueError("tradeoff scheme needs 3 <= v and v - 2 <= k - 1")
        self.v = v
        super().__init__(k, n, ell, t=v - 2)

    def params(self):
        return {"k": self.k, "v": self.v, "n": self.n, "ell": self.ell}

    @property
    def claimed_security_scale(self) -> int:
        return binom(self.k, self.v - 2)


# -- transformations for the cipher attack -----------------------------------


class DualWrappedScheme(Scheme):
    """Every cipher query is followed by its redundant dual query."""

    def __init__(self, inner: Scheme):
        self.inner = inner
        self.name = f"dual({inner.name})"
        self.message_bits = inner.message_bits
        self.oracle_kind = inner.oracle_kind
        self.tape_bits = inner.tape_bits
        self.randomized_verifier = inner.randomized_verifier
        self.coin_bits = inner.coin_bits
        b = inner.budgets
        self.budgets = Budgets(2 * b.gen, 2 * b.sign, 2 * b.ver, 2 * b.total, 2 * b.v)

    def params(self):
        return self.inner.params()

    def gen(self, tape):
        return (yield from wrap_redundant_dual(self.inner.gen(tape)))

    def sign(self, sk, message):
        return (yield from wrap_redundant_dual(self.inner.sign(sk, message)))

    def verify(self, vk, message, sig, coins=None):
        return (yield from wrap_redundant_dual(self.inner.verify(vk, message, sig, coins)))


def _merge_small(proc, threshold: int):
    """Answer short cipher queries from whole-table ``Merged`` queries."""
    try:
        q = next(proc)
        while True:
            if isinstance(q, Cipher) and q.input.length < threshold:
                table = yield Merged(q.key, q.input.length)
                a = merged_lookup(table, q.input.length, q.input, q.direction)
            else:
                a = yield q
            q = proc.send(a)
    except StopIteration as stop:
        return stop.value


class MergedScheme(Scheme):
    """Runs ``inner`` against the merged-small-query oracle for a ``q``-query scheme."""

    def __init__(self, inner: Scheme, q: int | None = None):
        if not isinstance(inner.oracle_kind, IdealCipher):
            raise ValueError("merging applies to ideal-cipher schemes")
        self.inner = inner
        self.threshold = merge_threshold(inner.q if q is None else q)
        self.name = f"merged({inner.name})"
        self.message_bits = inner.message_bits
        self.oracle_kind = inner.oracle_kind
        self.tape_bits = inner.tape_bits
        self.randomized_verifier = inner.randomized_verifier
        self.coin_bits = inner.coin_bits
        self.budgets = inner.budgets

    def params(self):
        return self.inner.params()

    def gen(self, tape):
        return (yield from _merge_small(self.inner.gen(tape), self.threshold))

    def sign(self, sk, message):
        return (yield from _merge_small(self.inner.sign(sk, message), self.threshold))

    def verify(self, vk, message, sig, coins=None):
        return (yield from _merge_small(self.inner.verify(vk, message, sig, coins), self.threshold))


# -- construction from names -------------------------------------------------

_INT_PARAMS = {"k", "n", "ell", "v", "coin_bits", "uniform_lengths"}


def make_scheme(name: str, **params) -> Scheme:
    params = {k: (int(v) if k in _INT_PARAMS else v) for k, v in params.items()}
    if name == "lamport":
        return LamportScheme(params["n"], params["ell"], params.get("primitive", "rf"))
    if name == "hash-and-sign":
        return HashAndSignScheme(params["k"], params["ell"], params["n"], params.get("primitive", "rf"))
    if name == "antichain":
        return AntichainScheme(
            params["k"], params["n"], params.get("ell"), uniform_lengths=bool(params.get("uniform_lengths", 0))
        )
    if name == "tradeoff":
        return TradeoffScheme(params["k"], params["v"], params["n"], params.get("ell"))
    if name == "coin-flip":
        return CoinFlipScheme(params["k"], params["ell"], params["n"], params.get("coin_bits", 4))
    raise KeyError(f"unknown scheme {name!r}")


def scheme_from_descriptor(text: str) -> Scheme:
    fields = {}
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
    name = fields.pop("name")
    return make_scheme(name, **fields)


# -- completeness ------------------------------------------------------------


@dataclass
class CompletenessResult:
    passed: bool
    trials: int
    failures: int = 0
    counterexample: dict | None = None

    def __bool__(self) -> bool:
        return self.passed


def honest_run(scheme: Scheme, oracle, tape, message: Bits, coins=None):
    """Gen, Sign and Ver once; returns ``(keys, signature, accepted)``."""
    keys = run(scheme.gen(tape), oracle, "gen")
    sig = run(scheme.sign(keys.sk, message), oracle, "sign")
    ok = run(scheme.verify(keys.vk, message, sig, coins), oracle, "ver")
    return keys, sig, ok


def completeness_check(scheme: Scheme, trials: int, seed: int) -> CompletenessResult:
    """Honest signatures on random tapes, oracles and messages must all verify.

    For randomized verifiers the acceptance is checked over the verifier's
    coins with a fixed coin tape per trial, so a rejection is reported
    only when the coins are not the scheme's designated reject coins.
    """
    rng = random.Random(seed)
    for trial in range(trials):
        oracle = new_oracle(scheme.oracle_kind, rng.getrandbits(64))
        tape = RandomTape(random.Random(rng.getrandbits(64)))
        message = Bits(rng.getrandbits(scheme.message_bits), scheme.message_bits)
        coins = RandomTape(random.Random(rng.getrandbits(64))) if scheme.randomized_verifier else None
        try:
            keys, sig, ok = honest_run(scheme, oracle, tape, message, coins)
        except ConsistencyError:
            ok, keys, sig = False, None, None
        if not ok and scheme.randomized_verifier and coins.reads and coins.reads[0].value == 0:
            continue
        if not ok:
            return CompletenessResult(
                False,
                trials,
                1,
                {
                    "trial": trial,
                    "oracle_seed": oracle.seed,
                    "tape": [b.hex() for b in tape.reads],
                    "message": message.hex(),
                    "keys": keys,
                    "signature": sig,
                    "ledger": oracle.ledger.export(),
                },
            )
    return CompletenessResult(True, trials)


def known_answer_vector(scheme: Scheme, seed: int, message: Bits | None = None) -> str:
    """Ledger export plus hex-encoded tape, key, message and signature for one honest run."""
    rng = random.Random(seed)
    oracle = new_oracle(scheme.oracle_kind, rng.getrandbits(64))
    tape = RandomTape(random.Random(rng.getrandbits(64)))
    if message is None:
        message = Bits(rng.getrandbits(scheme.message_bits), scheme.message_bits)
    coins = RandomTape(random.Random(rng.getrandbits(64))) if scheme.randomized_verifier else None
    keys, sig, ok = honest_run(scheme, oracle, tape, message, coins)
    header = [
        "# " + scheme.descriptor().strip().replace("\n", " "),
        f"# oracle_seed={oracle.seed}",
        f"# tape={tape.consumed.hex()}",
        f"# vk={flatten(keys.vk).hex()}",
        f"# message={message.hex()}",
        f"# signature={flatten(sig).hex()}",
        f"# accepted={int(bool(ok))}",
    ]
    return "\n".join(header) + "\n" + oracle.ledger.export()


def replay_keys(scheme: Scheme, tape_reads, answers: dict) -> KeyPair:
    """Re-run key generation from recorded tape reads and answers."""

    class _Table:
        kind = scheme.oracle_kind

        def query(self, q, phase=""):
            return answers[q]

    return run(scheme.gen(FixedTape(tape_reads)), _Table())

"""The one-time forgery game, the four hybrid experiments, and success statistics."""

from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass, field

from .bits import Bits
from .oracle import (
    IdealCipher,
    Plain,
    ProtocolViolation,
    RandomFunction,
    RandomPermutation,
    RandomTape,
    SimulatedOracle,
    new_oracle,
    overlay,
    run,
    run_traced,
)
from .forge.attack import (
    CountingOracle,
    _Backend,
    forge,
    forge_cipher,
    forge_imperfect,
    forge_permutation,
    learn,
    sample_guess,
    usefulness_event,
)
from .forge.core import AttackParams, Knowledge, default_params, imperfect_params, message_schedule
from .runner import map_trials, trial_seed, wilson
from .schemes import AntichainScheme, HashAndSignScheme, LamportScheme


class BudgetExceeded(Exception):
    """The adversary tried to exceed its query budget."""


class BudgetedOracle(CountingOracle):
    """A counting oracle that refuses new distinct queries beyond ``budget``."""

    def __init__(self, base, budget: int | None):
        super().__init__(base)
        self.budget = budget

    def query(self, q, phase: str = ""):
        if self.budget is not None and q not in self.first_phase and self.distinct >= self.budget:
            raise BudgetExceeded(f"budget of {self.budget} queries exhausted")
        return super().query(q, phase)


@dataclass
class GameContext:
    """What an adversary sees: the scheme, the key, oracle access, and a one-shot signer."""

    scheme: object
    vk: tuple
    oracle: CountingOracle
    sign: object
    rng: random.Random
    budget: int | None = None
    reported_queries: int = 0  # queries made through wrappers the game cannot see


# -- adversaries ---------------------------------------------------------------


class Adversary:
    name = "adversary"

    def play(self, ctx: GameContext):
        raise NotImplementedError


def _fake_signature(scheme, message: Bits, rng: random.Random):
    """A well-shaped signature from an unrelated key and a private simulated oracle."""
    sim = SimulatedOracle(scheme.oracle_kind, rng)
    keys = run(scheme.gen(RandomTape(rng)), sim)
    return run(scheme.sign(keys.sk, message), sim)


def _other_message(message: Bits) -> Bits:
    return message.flip(message.length - 1)


class NullAdversary(Adversary):
    """Asks nothing and outputs a random well-shaped signature."""

    name = "null"

    def play(self, ctx):
        n = ctx.scheme.message_bits
        alpha = Bits(ctx.rng.getrandbits(n), n)
        return alpha, _fake_signature(ctx.scheme, alpha, ctx.rng)


class ReplayAdversary(Adversary):
    """Returns the signed message itself; the game flags this as a rule violation."""

    name = "replay"

    def play(self, ctx):
        alpha = Bits.zeros(ctx.scheme.message_bits)
        return alpha, ctx.sign(alpha)


class GreedySigner(Adversary):
    """Requests two signatures; the second request is a protocol violation."""

    name = "greedy"

    def play(self, ctx):
        alpha = Bits.zeros(ctx.scheme.message_bits)
        ctx.sign(alpha)
        beta = _other_message(alpha)
        return beta, ctx.sign(beta)


class ForgeAdversary(Adversary):
    """The generic forger, dispatched on the oracle kind and verifier type."""

    name = "forge"

    def __init__(self, params: AttackParams | None = None):
        self.params = params

    def play(self, ctx):
        scheme = ctx.scheme
        seed = ctx.rng.getrandbits(64)
        kind = scheme.oracle_kind
        if scheme.randomized_verifier:
            params = self.params or imperfect_params(scheme)
            out = forge_imperfect(scheme, ctx.oracle, ctx.vk, ctx.sign, params, seed)
        elif isinstance(kind, IdealCipher):
            out = forge_cipher(scheme, ctx.oracle.base, ctx.vk, ctx.sign, self.params, seed)
        elif isinstance(kind, RandomPermutation):
            out = forge_permutation(scheme, ctx.oracle, ctx.vk, ctx.sign, self.params, seed)
        else:
            out = forge(scheme, ctx.oracle, ctx.vk, ctx.sign, self.params or default_params(scheme), seed)
        ctx.reported_queries = out.queries
        if not out.success:
            return None
        return out.message, out.signature


class CollisionAdversary(Adversary):
    """Signs one message, then looks for another with the same revealed secrets.

    Works for hash-and-sign and the antichain scheme: every query hashes a
    new candidate message, and a candidate whose revealed index set equals
    that of the signed message reuses the signature.
    """

    name = "collision"

    def __init__(self, T: int):
        self.T = T

    def _indices(self, scheme, answer):
        if isinstance(scheme, AntichainScheme):
            return scheme.subset(answer)
        return answer.prefix(scheme.k)

    def play(self, ctx):
        scheme = ctx.scheme
        n = scheme.message_bits
        alpha0 = Bits.zeros(n)
        sigma0 = ctx.sign(alpha0)
        used = 0
        if isinstance(scheme, AntichainScheme) and not scheme.ap.uniform_lengths:
            # secret lengths are distinct, so the signature itself names the subset
            target = tuple(scheme.ap.secret_len_index(x.length) for x in sigma0[:-1])
            salt = sigma0[-1]
        else:
            if self.T < 1:
                return None
            salt = sigma0[-1] if isinstance(scheme, AntichainScheme) else None
            target = self._indices(scheme, ctx.oracle.query(self._hash_query(scheme, salt, alpha0)))
            used = 1
        for v in range(1, min(1 << n, self.T - used + 1)):
            alpha = Bits(v, n)
            if self._indices(scheme, ctx.oracle.query(self._hash_query(scheme, salt, alpha))) == target:
                return alpha, sigma0
        return None

    @staticmethod
    def _hash_query(scheme, salt, alpha):
        if isinstance(scheme, AntichainScheme):
            return Plain(salt + alpha)
        return scheme._hash_query(alpha)


class InvertAdversary(Adversary):
    """Lamport: tries ``T`` random preimages of the image the forgery needs."""

    name = "invert"

    def __init__(self, T: int):
        self.T = T

    def play(self, ctx):
        scheme = ctx.scheme
        n, ell = scheme.message_bits, scheme.ell
        alpha0 = Bits.zeros(n)
        sigma0 = ctx.sign(alpha0)
        target = ctx.vk[1]  # image of the secret for bit 1 in position 0
        for _ in range(self.T):
            x = Bits(ctx.rng.getrandbits(ell), ell)
            if ctx.oracle.query(Plain(x)) == target:
                return alpha0.flip(0), (x,) + tuple(sigma0[1:])
        return alpha0.flip(0), (Bits(ctx.rng.getrandbits(ell), ell),) + tuple(sigma0[1:])


def brute_force_family(scheme):
    """The budgeted brute-force adversary suited to ``scheme``."""
    if isinstance(scheme, LamportScheme):
        return InvertAdversary
    if isinstance(scheme, (HashAndSignScheme, AntichainScheme)):
        return CollisionAdversary
    raise ValueError(f"no brute-force adversary for {scheme.name}")


# -- the game --------------------------------------------------------------------


@dataclass
class TrialResult:
    seed: int
    success: bool
    violation: str | None
    queries: int
    truncated: bool = False


@dataclass
class GameStats:
    trials: int
    successes: int
    rate: float
    ci95: tuple
    mean_queries: float
    max_queries: int
    seeds: list = field(default_factory=list)
    violations: int = 0
    truncated: int = 0
    results: list = field(default_factory=list, repr=False)

    @classmethod
    def from_results(cls, results: list[TrialResult]) -> "GameStats":
        t = len(results)
        s = sum(r.success for r in results)
        qs = [r.queries for r in results]
        return cls(
            trials=t,
            successes=s,
            rate=s / t if t else 0.0,
            ci95=wilson(s, t),
            mean_queries=sum(qs) / t if t else 0.0,
            max_queries=max(qs) if qs else 0,
            seeds=[r.seed for r in results],
            violations=sum(r.violation is not None for r in results),
            truncated=sum(r.truncated for r in results),
            results=results,
        )


def play_trial(scheme, adversary: Adversary, seed: int, budget: int | None = None) -> TrialResult:
    """One run of the one-time forgery game."""
    rng = random.Random(seed)
    oracle = new_oracle(scheme.oracle_kind, rng.getrandbits(64))
    keys = run(scheme.gen(RandomTape(random.Random(rng.getrandbits(64)))), oracle, "gen")
    signed: list[Bits] = []

    def signer(message: Bits):
        if signed:
            raise ProtocolViolation("second signing request")
        signed.append(message)
        return run(scheme.sign(keys.sk, message), oracle, "signer")

    access = BudgetedOracle(oracle, budget)
    ctx = GameContext(scheme, keys.vk, access, signer, random.Random(rng.getrandbits(64)), budget)
    coins = RandomTape(random.Random(rng.getrandbits(64))) if scheme.randomized_verifier else None
    try:
        out = adversary.play(ctx)
    except ProtocolViolation as exc:
        return TrialResult(seed, False, f"protocol: {exc}", access.distinct)
    except BudgetExceeded:
        return TrialResult(seed, False, None, access.distinct, truncated=True)
    used = max(access.distinct, ctx.reported_queries)
    if out is None:
        return TrialResult(seed, False, None, used)
    message, sig = out
    if signed and message == signed[0]:
        return TrialResult(seed, False, "forged message equals the signed message", used)
    ok = run(scheme.verify(keys.vk, message, sig, coins), oracle, "challenge")
    return TrialResult(seed, bool(ok), None, used)


def _play(args):
    return play_trial(*args)


def run_forgery_game(scheme, adversary: Adversary, trials: int, master_seed: int, jobs: int = 1, budget: int | None = None) -> GameStats:
    seeds = [trial_seed(master_seed, i, "game") for i in range(trials)]
    results = map_trials(_play, [(scheme, adversary, s, budget) for s in seeds], jobs)
    return GameStats.from_results(results)


def security_curve(scheme, family, budgets: list[int], trials: int, seed: int, jobs: int = 1) -> list[tuple[int, GameStats]]:
    """Success rate of ``family(T)`` under a hard budget of ``T`` distinct queries."""
    if list(budgets) != sorted(budgets):
        raise ValueError("budgets must be ascending")
    return [(T, run_forgery_game(scheme, family(T), trials, seed, jobs, budget=T)) for T in budgets]


def game_csv(scheme_name: str, rows: list[tuple[str, int, GameStats]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scheme", "adversary", "T", "trials", "successes", "lo95", "hi95"])
    for adversary, T, st in rows:
        w.writerow([scheme_name, adversary, T, st.trials, st.successes, f"{st.ci95[0]:.6f}", f"{st.ci95[1]:.6f}"])
    return buf.getvalue()


def imperfect_trial(scheme, params: AttackParams, seed: int, checks: int = 1000) -> tuple[bool, float]:
    """Attack a randomized-verifier scheme, then re-measure the forgery's acceptance.

    Returns ``(success, acceptance)`` where acceptance is the fraction of
    ``checks`` fresh-coin verifications (against the real oracle, after
    the attack) that accept the returned forgery; 0 if none was returned.
    """
    rng = random.Random(seed)
    oracle = new_oracle(scheme.oracle_kind, rng.getrandbits(64))
    keys = run(scheme.gen(RandomTape(random.Random(rng.getrandbits(64)))), oracle, "gen")
    signed: list[Bits] = []

    def signer(message: Bits):
        if signed:
            raise ProtocolViolation("second signing request")
        signed.append(message)
        return run(scheme.sign(keys.sk, message), oracle, "signer")

    out = forge_imperfect(scheme, oracle, keys.vk, signer, params, rng.getrandbits(64))
    if not out.success or out.message == signed[0]:
        return False, 0.0
    coin_rng = random.Random(rng.getrandbits(64))
    accepted = sum(
        bool(run(scheme.verify(keys.vk, out.message, out.signature, RandomTape(coin_rng)), oracle, "challenge"))
        for _ in range(checks)
    )
    return True, accepted / checks


def _imperfect_job(args):
    return imperfect_trial(*args)


def imperfect_experiment(scheme, params: AttackParams, trials: int, seed: int, checks: int = 1000, jobs: int = 1) -> list[tuple[bool, float]]:
    seeds = [trial_seed(seed, i, "imperfect") for i in range(trials)]
    return map_trials(_imperfect_job, [(scheme, params, s, checks) for s in seeds], jobs)


# -- hybrids ---------------------------------------------------------------------


class _Recorder:
    """Records every query passed through to ``inner``."""

    def __init__(self, inner):
        self.inner = inner
        self.kind = inner.kind
        self.asked: set = set()

    def query(self, q, phase: str = ""):
        self.asked.add(q)
        return self.inner.query(q, phase)


class _Rerandomized:
    """``base`` except on ``region``, where answers are fresh and independent."""

    def __init__(self, base, region: set, rng: random.Random):
        if not isinstance(base.kind, RandomFunction):
            raise ValueError("re-randomizing a region is implemented for random functions only")
        self.base = base
        self.kind = base.kind
        self.region = region
        self.fresh = SimulatedOracle(base.kind, rng)

    def query(self, q, phase: str = ""):
        if q in self.region:
            return self.fresh.query(q, phase)
        return self.base.query(q, phase)


@dataclass
class HybridTrial:
    union_E: bool
    first_useful: int | None
    B: bool
    step4_distinct: int
    accepted: int
    learned: int = 0


@dataclass
class HybridReport:
    hybrid: int
    trials: int
    freq_E: float
    freq_B: float
    seed: int
    indicators: list = field(default_factory=list, repr=False)
    records: list = field(default_factory=list, repr=False)

    @property
    def counts(self) -> dict:
        return {"E": sum(self.indicators), "B": sum(r.B for r in self.records)}


def _step4(scheme, vk, msgs, v0, sk, sign_oracle, verify_oracle, useful, region: set, full: bool) -> HybridTrial:
    asked: set = set()
    first = None
    accepted = 0
    for j, alpha in enumerate(msgs[1:], 1):
        so, vo = _Recorder(sign_oracle), _Recorder(verify_oracle)
        sig = run(scheme.sign(sk, alpha), so, "forging")
        ok, trace = run_traced(scheme.verify(vk, alpha, sig), vo, "forging")
        asked |= so.asked | vo.asked
        accepted += bool(ok)
        vj = {q for q, _ in trace}
        if first is None and useful(vj):
            first = j
            if not full:
                break
    return HybridTrial(first is not None, first, bool(asked & region), len(asked), accepted)


def hybrid_trial(scheme, params: AttackParams, seed: int, hybrids=(0, 1, 2, 3), full: bool = False) -> dict[int, HybridTrial]:
    """All requested hybrids on one shared draw of oracle, key randomness and adversary coins.

    ``full`` runs every candidate message instead of stopping at the first
    useful one; event B is only meaningful with ``full`` (it always runs
    for hybrids 1 and 2).
    """
    rng = random.Random(seed)
    oracle_seed, tape_seed, adv_seed, fresh_seed = (rng.getrandbits(64) for _ in range(4))
    oracle = new_oracle(scheme.oracle_kind, oracle_seed)
    keys = run(scheme.gen(RandomTape(random.Random(tape_seed))), oracle, "gen")
    adv = random.Random(adv_seed)
    msgs = message_schedule(params.n, params.N, adv)
    alpha0 = msgs[0]
    sigma0 = run(scheme.sign(keys.sk, alpha0), oracle, "sign")
    ok, trace = run_traced(scheme.verify(keys.vk, alpha0, sigma0), oracle, "ver")
    v0 = frozenset(q for q, _ in trace)
    G = oracle.ledger.queries(["gen"])
    S0 = oracle.ledger.queries(["sign"])
    true_queries = G | S0 | v0
    out: dict[int, HybridTrial] = {}
    if 3 in hybrids:
        out[3] = _step4(
            scheme, keys.vk, msgs, v0, keys.sk, oracle, oracle,
            lambda vj: (vj & (G | S0)) <= v0, set(), full,
        )
    if not any(h in hybrids for h in (0, 1, 2)):
        return out
    co = CountingOracle(oracle)
    knowledge = Knowledge(keys.vk, alpha0, sigma0, dict(trace), v0)
    backend = _Backend(scheme, params)
    learned = learn(co, knowledge, backend, params, adv)
    guess = sample_guess(knowledge, backend, adv)
    region = true_queries - set(knowledge.table)

    def useful(vj):
        return usefulness_event(guess, v0, vj)

    if 0 in hybrids:
        tilde = overlay(guess.guessed, oracle)
        out[0] = _step4(scheme, keys.vk, msgs, v0, guess.sk, tilde, oracle, useful, region, full)
    if 1 in hybrids:
        tilde = overlay(guess.guessed, oracle)
        out[1] = _step4(scheme, keys.vk, msgs, v0, guess.sk, tilde, tilde, useful, region, True)
    if 2 in hybrids:
        base = _Rerandomized(oracle, region, random.Random(fresh_seed))
        tilde = overlay(guess.guessed, base)
        out[2] = _step4(scheme, keys.vk, msgs, v0, guess.sk, tilde, tilde, useful, region, True)
    for h in (0, 1, 2):
        if h in out:
            out[h].learned = learned
    return out


def _hybrid_job(args):
    return hybrid_trial(*args)


def hybrid_experiments(scheme, hybrids, params: AttackParams, trials: int, seed: int, jobs: int = 1, full: bool = False) -> dict[int, HybridReport]:
    """Coupled hybrid experiments: trial ``i`` of every hybrid shares its randomness."""
    seeds = [trial_seed(seed, i, "hybrid") for i in range(trials)]
    rows = map_trials(_hybrid_job, [(scheme, params, s, tuple(hybrids), full) for s in seeds], jobs)
    reports = {}
    for h in hybrids:
        recs = [r[h] for r in rows]
        ind = [r.union_E for r in recs]
        reports[h] = HybridReport(
            h,
            trials,
            sum(ind) / trials if trials else 0.0,
            sum(r.B for r in recs) / trials if trials else 0.0,
            seed,
            ind,
            recs,
        )
    return reports


def hybrid_experiment(scheme, hybrid_index: int, params: AttackParams, trials: int, seed: int, jobs: int = 1, full: bool = False) -> HybridReport:
    if hybrid_index not in (0, 1, 2, 3):
        raise ValueError("hybrid index must be 0, 1, 2 or 3")
    return hybrid_experiments(scheme, (hybrid_index,), params, trials, seed, jobs, full)[hybrid_index]


def hybrid_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["hybrid", "trials", "freq_Ej", "freq_B", "seed"])
    for r in reports:
        w.writerow([r.hybrid, r.trials, f"{r.freq_E:.6f}", f"{r.freq_B:.6f}", r.seed])
    return buf.getvalue()

"""The generic forger: verify the one signature, learn heavy queries, guess a transcript, forge.

Step 1 verifies ``(alpha0, sigma0)``; its query/answer pairs start the
adversary's knowledge. Step 2 repeatedly asks the real oracle the first
query that the conditional transcript distribution asks with probability
at least ``epsilon``. Step 3 samples a transcript from the final
conditional distribution and keeps its key generation tape and guessed
answers. Step 4 signs further messages with the guessed key, answering
guessed queries from the guess and all others from the real oracle, and
outputs the first signature that the real verifier accepts.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field

from ..bits import Bits
from ..oracle import (
    ConsistencyError,
    IdealCipher,
    OracleInstance,
    RandomPermutation,
    RandomTape,
    merged_small_query_oracle,
    overlay,
    run,
    run_traced,
)
from ..schemes import DualWrappedScheme, MergedScheme
from .core import (
    EXACT,
    MONTE_CARLO,
    AttackOutcome,
    AttackParams,
    CapacityError,
    GuessedTranscript,
    Knowledge,
    default_params,
    message_schedule,
)
from .exact import conditional_transcripts_exact
from .montecarlo import conditional_sample_mc, conditional_samples_mc, heavy_query_mc

AUTO = "auto"


class CountingOracle:
    """Forwards queries to ``base`` and counts distinct queries per phase."""

    def __init__(self, base):
        self.base = base
        self.kind = base.kind
        self.first_phase: dict = {}
        self.entries: list = []

    def query(self, q, phase: str = ""):
        a = self.base.query(q, phase)
        if q not in self.first_phase:
            self.first_phase[q] = phase
        self.entries.append((phase, q, a))
        return a

    @property
    def distinct(self) -> int:
        return len(self.first_phase)

    def per_phase(self) -> dict:
        return dict(Counter(self.first_phase.values()))

    def queries(self) -> set:
        return set(self.first_phase)


# -- samplers --------------------------------------------------------------------


class _Backend:
    """Heavy-query search and transcript sampling over one conditional distribution."""

    def __init__(self, scheme, params: AttackParams):
        self.scheme = scheme
        self.params = params
        self.mode = params.backend
        self._cache = None
        self.fallbacks = 0

    def _exact(self, knowledge: Knowledge):
        key = (len(knowledge.learned), len(knowledge.table))
        if self._cache is not None and self._cache[0] == key:
            return self._cache[1]
        ws = conditional_transcripts_exact(self.scheme, knowledge, self.params.branch_cap)
        self._cache = (key, ws)
        return ws

    def _use_exact(self) -> bool:
        return self.mode in (EXACT, AUTO)

    def heavy(self, knowledge: Knowledge, rng: random.Random):
        if self._use_exact():
            try:
                return self._exact(knowledge).heavy_query(self.params.epsilon, knowledge)
            except CapacityError:
                if self.mode == EXACT:
                    raise
                self.mode = MONTE_CARLO
                self.fallbacks += 1
        samples = conditional_samples_mc(
            self.scheme, knowledge, self.params.mc_samples, self.params.rejection_budget, rng
        )
        return heavy_query_mc(samples, self.params.epsilon, knowledge)

    def sample(self, knowledge: Knowledge, rng: random.Random) -> GuessedTranscript:
        if self._use_exact():
            try:
                return self._exact(knowledge).sample(rng)
            except CapacityError:
                if self.mode == EXACT:
                    raise
                self.mode = MONTE_CARLO
                self.fallbacks += 1
        return conditional_sample_mc(self.scheme, knowledge, self.params.rejection_budget, rng)


def heavy_query(backend: _Backend, knowledge: Knowledge, rng: random.Random):
    return backend.heavy(knowledge, rng)


def learn(oracle, knowledge: Knowledge, backend: _Backend, params: AttackParams, rng: random.Random, phase: str = "learning") -> int:
    """Step 2; returns the number of learned pairs."""
    learned = 0
    for _ in range(params.M):
        q = backend.heavy(knowledge, rng)
        if q is None:
            if params.early_exit:
                break
            continue
        knowledge.add(q, oracle.query(q, phase))
        learned += 1
    return learned


def sample_guess(knowledge: Knowledge, backend: _Backend, rng: random.Random) -> GuessedTranscript:
    """Step 3: one transcript from the final conditional distribution."""
    guess = backend.sample(knowledge, rng)
    for q, a in guess.guessed.items():
        if knowledge.knows(q):
            raise AssertionError("a guessed pair shadows a learned pair")
    return guess


def usefulness_event(guess, v0, vj) -> bool:
    """``V_j`` meets the guessed Gen and Sign queries only inside ``V_0``."""
    return (set(vj) & (guess.G | guess.S0)) <= set(v0)


# -- Step 4 --------------------------------------------------------------------


@dataclass
class Candidate:
    index: int
    message: Bits
    signature: tuple | None
    accepted: bool
    useful: bool
    verify_queries: frozenset = frozenset()
    error: str | None = None


def sign_with_guess(scheme, guess: GuessedTranscript, sign_oracle, message: Bits, phase: str):
    """Sign with the guessed key; ``sign_oracle`` is already the overlay."""
    return run(scheme.sign(guess.sk, message), sign_oracle, phase)


def try_candidate(scheme, guess, real, vk, v0, j: int, message: Bits, *, verify_oracle=None, base=None, phase="forging") -> Candidate:
    """Sign ``message`` under the overlay of the guess on ``base`` and verify under ``verify_oracle``."""
    base = real if base is None else base
    verify_oracle = real if verify_oracle is None else verify_oracle
    try:
        tilde = overlay(guess.guessed, base)
        sig = sign_with_guess(scheme, guess, tilde, message, phase)
        if verify_oracle == "overlay":
            verify_oracle = tilde
        ok, trace = run_traced(scheme.verify(vk, message, sig), verify_oracle, phase)
    except ConsistencyError as exc:
        return Candidate(j, message, None, False, False, error=str(exc))
    vj = frozenset(q for q, _ in trace)
    return Candidate(j, message, sig, bool(ok), usefulness_event(guess, v0, vj), vj)


def _recheck(scheme, oracle, vk, message, sig) -> bool:
    """Independent re-verification on a fresh counting wrapper."""
    return bool(run(scheme.verify(vk, message, sig), CountingOracle(oracle), "recheck"))


# -- the attack ------------------------------------------------------------------


def _attack(scheme, oracle, vk, signer, params: AttackParams, seed, *, messages=None, outer_scheme=None, outer_oracle=None):
    rng = random.Random(seed)
    co = oracle if isinstance(oracle, CountingOracle) else CountingOracle(oracle)
    msgs = messages if messages is not None else message_schedule(params.n, params.N, rng)
    alpha0 = msgs[0]
    sigma0 = signer(alpha0)
    ok, trace = run_traced(scheme.verify(vk, alpha0, sigma0), co, "verify0")
    v0 = frozenset(q for q, _ in trace)
    knowledge = Knowledge(vk, alpha0, sigma0, dict(trace), v0)
    backend = _Backend(scheme, params)
    notes: dict = {}
    outcome = AttackOutcome(False, alpha0=alpha0, notes=notes)
    try:
        learned = learn(co, knowledge, backend, params, rng)
        guess = sample_guess(knowledge, backend, rng)
    except (CapacityError, RuntimeError) as exc:
        outcome.failure = f"{type(exc).__name__}: {exc}"
        outcome.queries = co.distinct
        outcome.per_phase = co.per_phase()
        return outcome, None, knowledge
    outcome.learned = learned
    notes["fallbacks"] = backend.fallbacks
    notes["guess_exact_sk"] = None
    lemma_ok = True
    skipped = 0
    for j, alpha in enumerate(msgs[1:], 1):
        cand = try_candidate(scheme, guess, co, vk, v0, j, alpha)
        if cand.error is not None:
            skipped += 1
            continue
        if cand.useful and outcome.useful_index is None:
            outcome.useful_index = j
        if cand.useful and not cand.accepted:
            lemma_ok = False
        if cand.accepted:
            check_scheme = outer_scheme or scheme
            check_oracle = outer_oracle or co.base
            if not _recheck(check_scheme, check_oracle, vk, alpha, cand.signature):
                raise AssertionError("accepted forgery failed re-verification")
            outcome.success = True
            outcome.message = alpha
            outcome.signature = cand.signature
            outcome.accepted_index = j
            break
    if not outcome.success:
        outcome.failure = "no candidate verified"
    notes["lemma_ok"] = lemma_ok
    notes["consistency_skips"] = skipped
    outcome.queries = co.distinct
    outcome.per_phase = co.per_phase()
    return outcome, guess, knowledge


def forge(scheme, oracle, vk, signer, params: AttackParams, seed) -> AttackOutcome:
    """Run the full attack against ``vk`` with one call to ``signer``.

    ``oracle`` is the adversary's access to the real oracle; every query
    is counted. The outcome's ``queries`` is the number of distinct
    queries the adversary asked.
    """
    outcome, _, _ = _attack(scheme, oracle, vk, signer, params, seed)
    return outcome


def cipher_view(scheme, q_outer: int | None = None):
    """The dual-wrapped, merged form of an ideal-cipher scheme the cipher attack works on."""
    if not isinstance(scheme.oracle_kind, IdealCipher):
        raise ValueError("the cipher attack needs an ideal-cipher scheme")
    wrapped = DualWrappedScheme(scheme)
    return MergedScheme(wrapped, wrapped.q if q_outer is None else q_outer)


def forge_cipher(scheme, oracle: OracleInstance, vk, signer, params: AttackParams | None, seed) -> AttackOutcome:
    """The attack on an ideal-cipher scheme.

    The adversary works with the dual-wrapped scheme (``q' = 2q``) run
    against the merged-small-query oracle, so every short cipher query
    becomes one whole-table query.
    """
    view = cipher_view(scheme)
    if params is None:
        params = default_params(view)
    notes = {}
    if view.inner.inner.q * 4 > params.n:
        notes["warning"] = "q > n/4: outside the asymptotic hypothesis"
    merged = merged_small_query_oracle(oracle, view.q)
    outcome, _, _ = _attack(view, merged, vk, signer, params, seed, outer_scheme=scheme, outer_oracle=oracle)
    outcome.notes.update(notes)
    return outcome


def forge_permutation(scheme, oracle: OracleInstance, vk, signer, params: AttackParams | None, seed) -> AttackOutcome:
    """The attack on a random-permutation scheme; fresh answers are drawn from unused values."""
    if not isinstance(scheme.oracle_kind, RandomPermutation):
        raise ValueError("the permutation attack needs a random-permutation scheme")
    if params is None:
        params = default_params(scheme)
    outcome, _, _ = _attack(scheme, oracle, vk, signer, params, seed)
    if scheme.q * 2 > params.n:
        outcome.notes["warning"] = "q > n/2: outside the asymptotic hypothesis"
    return outcome


# -- imperfect completeness ----------------------------------------------------


def _verify_runs(scheme, oracle, vk, message, sig, runs: int, rng: random.Random, phase: str):
    accepted = 0
    counts: Counter = Counter()
    pairs: dict = {}
    for _ in range(runs):
        coins = RandomTape(rng)
        ok, trace = run_traced(scheme.verify(vk, message, sig, coins), oracle, phase)
        accepted += bool(ok)
        for q in {q for q, _ in trace}:
            counts[q] += 1
        pairs.update(trace)
    return accepted, counts, pairs


def forge_imperfect(scheme, oracle, vk, signer, params: AttackParams, seed) -> AttackOutcome:
    """The attack on a scheme whose verifier accepts honest signatures with probability >= 0.9.

    Step 1 verifies ``(alpha0, sigma0)`` ``verify_runs`` times with fresh
    coins and learns every pair seen. Candidates are signed as in the
    perfect case and accepted once they pass at least ``pass_fraction``
    of ``test_runs`` fresh verifications.
    """
    rng = random.Random(seed)
    co = oracle if isinstance(oracle, CountingOracle) else CountingOracle(oracle)
    msgs = message_schedule(params.n, params.N, rng)
    alpha0 = msgs[0]
    sigma0 = signer(alpha0)
    _, counts, pairs = _verify_runs(scheme, co, vk, alpha0, sigma0, params.verify_runs, rng, "verify0")
    cut = params.heavy_fraction * params.verify_runs
    v0 = frozenset(q for q, c in counts.items() if c >= cut)
    knowledge = Knowledge(vk, alpha0, sigma0, dict(pairs), v0)
    backend = _Backend(scheme, params)
    outcome = AttackOutcome(False, alpha0=alpha0, notes={"caps": [list(c) for c in params.caps]})
    try:
        outcome.learned = learn(co, knowledge, backend, params, rng)
        guess = sample_guess(knowledge, backend, rng)
    except (CapacityError, RuntimeError) as exc:
        outcome.failure = f"{type(exc).__name__}: {exc}"
        outcome.queries = co.distinct
        outcome.per_phase = co.per_phase()
        return outcome
    need = params.pass_fraction * params.test_runs
    for j, alpha in enumerate(msgs[1:], 1):
        try:
            tilde = overlay(guess.guessed, co)
            sig = sign_with_guess(scheme, guess, tilde, alpha, "forging")
        except ConsistencyError:
            continue
        passed, counts_j, _ = _verify_runs(scheme, co, vk, alpha, sig, params.test_runs, rng, "forging")
        vj = {q for q, c in counts_j.items() if c >= params.heavy_fraction * params.test_runs}
        if outcome.useful_index is None and usefulness_event(guess, v0, vj):
            outcome.useful_index = j
        if passed >= need:
            outcome.success = True
            outcome.message = alpha
            outcome.signature = sig
            outcome.accepted_index = j
            outcome.notes["pass_rate"] = passed / params.test_runs
            break
    if not outcome.success:
        outcome.failure = "no candidate passed the acceptance test"
    outcome.queries = co.distinct
    outcome.per_phase = co.per_phase()
    return outcome


# -- export ----------------------------------------------------------------------


def outcome_record(outcome: AttackOutcome, params: AttackParams) -> dict:
    """JSON-ready summary of one attack."""
    return {
        "params": {
            "q": params.q,
            "n": params.n,
            "N": params.N,
            "lambda": str(params.lam),
            "delta": str(params.delta),
            "epsilon": str(params.epsilon),
            "M": params.M,
            "backend": params.backend,
            "profile": params.profile,
            "caps": [list(c) for c in params.caps],
        },
        "success": outcome.success,
        "message": outcome.message.hex() if outcome.message is not None else None,
        "signature": [b.hex() for b in outcome.signature] if outcome.signature else None,
        "queries": outcome.queries,
        "per_phase": dict(sorted(outcome.per_phase.items())),
        "learned": outcome.learned,
        "useful_index": outcome.useful_index,
        "accepted_index": outcome.accepted_index,
        "failure": outcome.failure,
    }


def export_trace(oracle: CountingOracle, outcome: AttackOutcome, params: AttackParams) -> dict[str, str]:
    """Ledger-format text per phase plus a JSON summary, keyed by file name."""
    files: dict[str, str] = {}
    by_phase: dict[str, list] = {}
    for seq, (phase, q, a) in enumerate(oracle.entries):
        by_phase.setdefault(phase or "none", []).append(f"{seq},{phase},{q.kind},{q.encode()},{a.hex()}")
    for phase, lines in sorted(by_phase.items()):
        files[f"{phase}.ledger"] = "\n".join(lines) + "\n"
    files["summary.json"] = json.dumps(outcome_record(outcome, params), indent=2, sort_keys=True) + "\n"
    return files

"""Shared fixtures-by-function for the test modules."""

import random

from otslab.bits import Bits
from otslab.forge.core import Knowledge
from otslab.oracle import Plain, RandomFunction, RandomTape, new_oracle, run, run_traced
from otslab.schemes import Budgets, KeyPair, Scheme


def attack_state(scheme, seed, message=None):
    """Honest keys, one signature and its verification, as the adversary sees them."""
    rng = random.Random(seed)
    oracle = new_oracle(scheme.oracle_kind, rng.getrandbits(64))
    tape = RandomTape(random.Random(rng.getrandbits(64)))
    keys = run(scheme.gen(tape), oracle, "gen")
    if message is None:
        message = Bits(rng.getrandbits(scheme.message_bits), scheme.message_bits)
    sig = run(scheme.sign(keys.sk, message), oracle, "sign")
    ok, trace = run_traced(scheme.verify(keys.vk, message, sig), oracle, "ver")
    assert ok
    knowledge = Knowledge(keys.vk, message, sig, dict(trace), frozenset(q for q, _ in trace))
    return oracle, tape, keys, knowledge


class ToyScheme(Scheme):
    """Key generation reads two tape bits and optionally asks one fixed query; the key is constant."""

    name = "toy"

    def __init__(self, ask_fixed: bool):
        self.ask_fixed = ask_fixed
        self.message_bits = 1
        self.oracle_kind = RandomFunction(2)
        self.tape_bits = 2
        self.budgets = Budgets(int(ask_fixed), 0, 0, int(ask_fixed), 0)

    def params(self):
        return {"ask_fixed": int(self.ask_fixed)}

    def gen(self, tape):
        x = tape.read(2)
        if self.ask_fixed:
            yield Plain(Bits(0, 2))
        return KeyPair((x,), ())

    def sign(self, sk, message):
        return ()
        yield  # pragma: no cover

    def verify(self, vk, message, sig, coins=None):
        return sig == ()
        yield  # pragma: no cover

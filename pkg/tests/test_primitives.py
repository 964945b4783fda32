import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otslab.bits import Bits
from otslab.oracle import IdealCipher, RandomFunction, RandomPermutation, new_oracle
from otslab.primitives import (
    KINDS,
    QUERY_COUNTS,
    IncompatibleOracle,
    build_primitive,
    distinguishing_game,
    games_csv,
    hardness_grid,
    inversion_game,
)


class _Counting:
    def __init__(self, base):
        self.base = base
        self.kind = base.kind
        self.asked = []

    def query(self, q, phase=""):
        self.asked.append(q)
        return self.base.query(q, phase)


def _oracle(kind, seed=1):
    return _Counting(new_oracle(kind, seed))


@given(st.integers(0, 255))
def test_owf_is_the_oracle(x):
    o = new_oracle(RandomFunction(8), 3)
    a, b = build_primitive("OWF", o), build_primitive("OWF", o)
    assert a.evaluate(Bits(x, 8)) == b.evaluate(Bits(x, 8)) == o.query(__import__("otslab.oracle", fromlist=["Plain"]).Plain(Bits(x, 8)))


def test_prg_pads_and_stretches():
    p = build_primitive("PRG", _oracle(RandomFunction(4)))
    out = p.evaluate(Bits(2, 2))
    assert out.length == 4
    with pytest.raises(ValueError):
        p.evaluate(Bits(2, 4))


def test_hardcore_bits_are_the_prefix():
    p = build_primitive("HardcoreFunction", _oracle(RandomFunction(6)))
    assert p.hardcore(Bits.from_str("101100")) == Bits.from_str("101")


def test_crhf_halves():
    p = build_primitive("CRHF", _oracle(RandomFunction(8)))
    assert p.evaluate(Bits(3, 8)).length == 4


@pytest.mark.parametrize(
    "kind,oracle_kind,op,args",
    [
        ("OWF", RandomFunction(8), "evaluate", (Bits(1, 8),)),
        ("OWP", RandomPermutation(8), "evaluate", (Bits(1, 8),)),
        ("CRHF", RandomFunction(8), "evaluate", (Bits(1, 8),)),
        ("PRG", RandomFunction(8), "evaluate", (Bits(1, 4),)),
        ("PRF", RandomFunction(8), "evaluate", (Bits(1, 8), Bits(2, 4))),
        ("MAC", RandomFunction(8), "tag", (Bits(2, 4), Bits(1, 8))),
        ("MAC", RandomFunction(8), "verify", (Bits(2, 4), Bits(1, 8), Bits(0, 8))),
        ("BlockCipher", IdealCipher(8), "encrypt", (Bits(2, 4), Bits(1, 8))),
        ("BlockCipher", IdealCipher(8), "decrypt", (Bits(2, 4), Bits(1, 8))),
        ("HardcoreFunction", RandomFunction(8), "evaluate", (Bits(1, 8),)),
        ("HardcoreFunction", RandomFunction(8), "hardcore", (Bits(1, 8),)),
    ],
)
def test_declared_query_counts(kind, oracle_kind, op, args):
    o = _oracle(oracle_kind)
    p = build_primitive(kind, o)
    getattr(p, op)(*args)
    assert len(o.asked) == QUERY_COUNTS[kind][op]


def test_mac_and_cipher_roundtrip():
    mac = build_primitive("MAC", _oracle(RandomFunction(8)))
    k, x = Bits(5, 4), Bits(9, 8)
    assert mac.verify(k, x, mac.tag(k, x))
    bc = build_primitive("BlockCipher", _oracle(IdealCipher(8)))
    assert bc.decrypt(k, bc.encrypt(k, x)) == x


def test_incompatible_oracles():
    with pytest.raises(IncompatibleOracle):
        build_primitive("OWP", _oracle(RandomFunction(8)))
    with pytest.raises(IncompatibleOracle):
        build_primitive("BlockCipher", _oracle(RandomFunction(8)))
    with pytest.raises(ValueError):
        build_primitive("RSA", _oracle(RandomFunction(8)))
    assert len(KINDS) == 8


def test_inversion_blind_guess():
    r = inversion_game(8, 0, 100000, 1)
    assert abs(r.value - 2**-8) <= 3 * r.sigma


def test_inversion_full_table():
    assert inversion_game(6, 64, 200, 2).value == 1.0
    assert inversion_game(6, 64, 200, 2, oracle="rf").value == 1.0


def test_inversion_random_function_bound():
    r = inversion_game(8, 4, 20000, 3, oracle="rf")
    assert r.bound == pytest.approx(10 / 256) and r.within


def test_inversion_rejects_negative_budget():
    with pytest.raises(ValueError):
        inversion_game(8, -1, 10, 1)


@pytest.mark.parametrize("kind", ["PRG", "PRF", "HardcoreFunction"])
def test_no_queries_no_advantage(kind):
    r = distinguishing_game(kind, 8, 0, 5000, 4)
    assert abs(r.value) <= 3 * r.sigma


def test_hardcore_advantage_bound():
    r = distinguishing_game("HardcoreFunction", 12, 16, 20000, 5)
    assert r.value <= 16 * 2**-6 + 3 * r.sigma


def test_known_key_breaks_prf():
    assert distinguishing_game("PRF", 8, 0, 2000, 6, known_key=True).value >= 0.95


def test_grid_csv_header():
    rows = hardness_grid(200, 1, ells=(8,), budgets=(0,))
    assert games_csv(rows).splitlines()[0] == "kind,ell,T,trials,rate_or_advantage,bound"
    assert len(rows) == 2

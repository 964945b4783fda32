import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otslab.bits import Bits, NeedValue, TapeSymbol, concat
from otslab.oracle import (
    BACKWARD,
    FORWARD,
    Cipher,
    ConsistencyError,
    FixedTape,
    IdealCipher,
    Merged,
    Plain,
    ProtocolViolation,
    QueryKindError,
    RandomFunction,
    RandomPermutation,
    RandomTape,
    SimulatedOracle,
    merge_threshold,
    merged_lookup,
    merged_small_query_oracle,
    new_oracle,
    overlay,
    run,
    run_traced,
    wrap_redundant_dual,
)


def bits(n):
    return st.integers(0, (1 << n) - 1).map(lambda v: Bits(v, n))


# -- bit strings -----------------------------------------------------------------


@given(st.integers(0, 255), st.integers(0, 255))
def test_concat_and_slice_roundtrip(a, b):
    x, y = Bits(a, 8), Bits(b, 8)
    xy = x + y
    assert xy.length == 16
    assert xy.prefix(8) == x and xy.slice(8, 16) == y
    assert concat([x, y]) == xy
    assert Bits.from_hex(xy.hex()) == xy if xy.length % 4 == 0 else True


def test_bits_rejects_overflow():
    with pytest.raises(ValueError):
        Bits(4, 2)


def test_symbol_forces_a_value():
    s = TapeSymbol(4, 0)
    with pytest.raises(NeedValue):
        s.value
    with pytest.raises(NeedValue):
        hash(s)


# -- seeded oracles --------------------------------------------------------------


@given(st.integers(0, 2**64 - 1), bits(4))
def test_same_seed_same_answer(seed, x):
    a = new_oracle(RandomFunction(4), seed).query(Plain(x))
    o = new_oracle(RandomFunction(4), seed)
    assert o.query(Plain(x)) == a
    assert o.query(Plain(x)) == a


@given(st.integers(0, 2**64 - 1))
def test_permutation_is_bijective(seed):
    o = new_oracle(RandomPermutation(2), seed)
    answers = [o.query(Plain(Bits(v, 2))).value for v in range(4)]
    assert sorted(answers) == [0, 1, 2, 3]


@given(st.integers(0, 2**64 - 1), bits(4), bits(4))
def test_cipher_inverse_consistency(seed, k, x):
    o = new_oracle(IdealCipher(4), seed)
    y = o.query(Cipher(k, x, FORWARD))
    assert o.query(Cipher(k, y, BACKWARD)) == x


def test_two_seeds_mostly_differ():
    rng = random.Random(5)
    x = Plain(Bits(0, 16))
    differ = sum(
        new_oracle(RandomFunction(16), rng.getrandbits(64)).query(x) != new_oracle(RandomFunction(16), rng.getrandbits(64)).query(x)
        for _ in range(1000)
    )
    assert differ >= 998


def test_kind_mismatch_rejected():
    with pytest.raises(QueryKindError):
        new_oracle(RandomFunction(4), 1).query(Cipher(Bits(0, 1), Bits(0, 4)))
    with pytest.raises(QueryKindError):
        new_oracle(IdealCipher(4), 1).query(Plain(Bits(0, 4)))
    with pytest.raises(QueryKindError):
        new_oracle(IdealCipher(4), 1).query(Cipher(Bits(0, 1), Bits(0, 3)))


def test_ledger_records_phases():
    o = new_oracle(RandomFunction(4), 3)
    o.query(Plain(Bits(1, 4)), "gen")
    o.query(Plain(Bits(1, 4)), "sign")
    o.query(Plain(Bits(2, 4)), "sign")
    assert o.ledger.distinct_count == 2
    assert o.ledger.queries(["sign"]) == {Plain(Bits(1, 4)), Plain(Bits(2, 4))}
    assert o.ledger.export().count("\n") >= 3


def test_simulated_permutation_fills_last_value():
    o = SimulatedOracle(RandomPermutation(2), random.Random(1))
    seen = {o.query(Plain(Bits(v, 2))).value for v in range(3)}
    last = o.query(Plain(Bits(3, 2))).value
    assert {last} == {0, 1, 2, 3} - seen


def test_simulated_respects_fixed_pairs():
    fixed = {Plain(Bits(0, 4)): Bits(9, 4)}
    o = SimulatedOracle(RandomFunction(4), random.Random(2), fixed=fixed)
    assert o.query(Plain(Bits(0, 4))) == Bits(9, 4)


# -- overlay ---------------------------------------------------------------------


def test_overlay_shadows_base():
    base = new_oracle(RandomFunction(4), 11)
    x = Plain(Bits(3, 4))
    real = base.peek(x)
    fake = Bits(real.value ^ 1, 4)
    o = overlay({x: fake}, base)
    assert o.query(x) == fake
    assert x not in base.ledger.queries()


@given(st.lists(bits(4), max_size=8))
def test_empty_overlay_is_identity(xs):
    a = new_oracle(RandomFunction(4), 7)
    b = overlay({}, new_oracle(RandomFunction(4), 7))
    assert [a.query(Plain(x)) for x in xs] == [b.query(Plain(x)) for x in xs]


def test_overlay_detects_permutation_collision():
    base = new_oracle(RandomPermutation(2), 4)
    x0, x1 = Plain(Bits(0, 2)), Plain(Bits(1, 2))
    o = overlay({x0: base.peek(x1)}, base)
    with pytest.raises(ConsistencyError):
        o.query(x1)


# -- merged small queries --------------------------------------------------------


def test_merge_threshold_values():
    assert merge_threshold(4) == 12
    assert merge_threshold(1) == 2


def test_merged_table_lists_forward_answers():
    base = new_oracle(IdealCipher(16), 8)
    m = merged_small_query_oracle(base, 4)
    k = Bits(5, 3)
    table = m.query(Merged(k, 2))
    assert table.length == 4 * 2
    assert m.query(Merged(k, 2)) == table
    assert sorted(merged_lookup(table, 2, Bits(x, 2), FORWARD).value for x in range(4)) == [0, 1, 2, 3]
    for x in range(4):
        y = merged_lookup(table, 2, Bits(x, 2), FORWARD)
        assert merged_lookup(table, 2, y, BACKWARD) == Bits(x, 2)


def test_merged_oracle_refuses_short_cipher_query():
    m = merged_small_query_oracle(new_oracle(IdealCipher(8), 1), 4)
    with pytest.raises(ProtocolViolation):
        m.query(Cipher(Bits(0, 2), Bits(0, 8)))


# -- procedures ------------------------------------------------------------------


def _forward_once(k, x):
    y = yield Cipher(k, x, FORWARD)
    return y


def test_dual_wrapping_adds_the_dual():
    o = new_oracle(IdealCipher(4), 2)
    y, trace = run_traced(wrap_redundant_dual(_forward_once(Bits(1, 2), Bits(3, 4))), o)
    assert len(trace) == 2
    assert trace[1][0] == Cipher(Bits(1, 2), y, BACKWARD)
    assert trace[1][1] == Bits(3, 4)


def _both(k, x):
    y = yield Cipher(k, x, FORWARD)
    yield Cipher(k, y, BACKWARD)
    return y


def test_dual_wrapping_keeps_distinct_count():
    o1, o2 = new_oracle(IdealCipher(4), 2), new_oracle(IdealCipher(4), 2)
    _, plain = run_traced(_both(Bits(1, 2), Bits(3, 4)), o1)
    _, wrapped = run_traced(wrap_redundant_dual(_both(Bits(1, 2), Bits(3, 4))), o2)
    assert len({q for q, _ in plain}) == len({q for q, _ in wrapped}) == 2


def test_tapes():
    t = FixedTape([Bits(1, 2), Bits(2, 3)])
    assert t.read(2) == Bits(1, 2) and t.read(3) == Bits(2, 3)
    r = RandomTape(random.Random(1))
    a = r.read(5)
    assert r.reads == [a] and r.consumed == a

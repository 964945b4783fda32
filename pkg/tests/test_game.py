import math

import pytest

from otslab.forge.core import default_params
from otslab.game import (
    BudgetExceeded,
    BudgetedOracle,
    CollisionAdversary,
    ForgeAdversary,
    GreedySigner,
    InvertAdversary,
    NullAdversary,
    ReplayAdversary,
    brute_force_family,
    game_csv,
    hybrid_csv,
    hybrid_experiment,
    hybrid_experiments,
    hybrid_trial,
    imperfect_experiment,
    play_trial,
    run_forgery_game,
    security_curve,
)
from otslab.bits import Bits
from otslab.forge.core import imperfect_params
from otslab.oracle import Plain, RandomFunction, new_oracle
from otslab.schemes import AntichainScheme, CoinFlipScheme, HashAndSignScheme, LamportScheme


def test_null_adversary_rarely_wins():
    st = run_forgery_game(LamportScheme(2, 8), NullAdversary(), 1000, 1)
    assert st.rate <= 0.01


def test_replay_is_a_violation():
    st = run_forgery_game(HashAndSignScheme(1, 6, 8), ReplayAdversary(), 20, 2)
    assert st.successes == 0 and st.violations == 20


def test_second_signature_is_refused():
    st = run_forgery_game(HashAndSignScheme(1, 6, 8), GreedySigner(), 5, 2)
    assert st.successes == 0 and st.violations == 5


def test_forge_adversary_hash_and_sign():
    s = HashAndSignScheme(1, 6, 8)
    st = run_forgery_game(s, ForgeAdversary(), 30, 3)
    assert st.rate >= 0.9
    assert st.max_queries <= default_params(s).query_bound


def test_budget_is_enforced():
    o = BudgetedOracle(new_oracle(RandomFunction(4), 1), 2)
    o.query(Plain(Bits(0, 4)))
    o.query(Plain(Bits(0, 4)))
    o.query(Plain(Bits(1, 4)))
    with pytest.raises(BudgetExceeded):
        o.query(Plain(Bits(2, 4)))


def test_security_curve_monotone_budgets():
    s = AntichainScheme(6, 8)
    rows = security_curve(s, brute_force_family(s), [0, 1, 4], 200, 5)
    assert [T for T, _ in rows] == [0, 1, 4]
    for T, st in rows:
        assert st.max_queries <= T
    csv_text = game_csv(s.name, [("collision", T, st) for T, st in rows])
    assert csv_text.splitlines()[0] == "scheme,adversary,T,trials,successes,lo95,hi95"
    with pytest.raises(ValueError):
        security_curve(s, brute_force_family(s), [4, 1], 10, 5)


def test_invert_adversary_full_budget():
    s = LamportScheme(1, 4)
    st = run_forgery_game(s, InvertAdversary(64), 100, 1)
    assert st.rate >= 0.9


def test_collision_adversary_hash_and_sign():
    # a 1-bit hash collides with the signed message after a few queries
    st = run_forgery_game(HashAndSignScheme(1, 6, 8), CollisionAdversary(16), 100, 4)
    assert st.rate >= 0.95


def test_play_trial_is_deterministic():
    s = HashAndSignScheme(1, 6, 8)
    assert play_trial(s, ForgeAdversary(), 77) == play_trial(s, ForgeAdversary(), 77)


def test_h0_h1_coupled():
    s = HashAndSignScheme(1, 4, 8)
    reps = hybrid_experiments(s, (0, 1), default_params(s), 50, 9)
    assert reps[0].indicators == reps[1].indicators


def test_h3_never_sees_event_b():
    s = HashAndSignScheme(1, 4, 8)
    rep = hybrid_experiment(s, 3, default_params(s), 50, 1)
    assert rep.freq_B == 0.0
    assert rep.freq_E >= 1 - float(default_params(s).lam) - 3 * math.sqrt(0.25 / 50)
    assert "hybrid,trials,freq_Ej,freq_B,seed" in hybrid_csv([rep])


def test_hybrid_trial_shares_randomness():
    s = HashAndSignScheme(1, 4, 8)
    p = default_params(s)
    a = hybrid_trial(s, p, 5, (0, 1, 2, 3))
    b = hybrid_trial(s, p, 5, (0, 1, 2, 3))
    assert a == b
    with pytest.raises(ValueError):
        hybrid_experiment(s, 4, p, 1, 1)


def test_imperfect_forgery_is_accepted_often():
    s = CoinFlipScheme(1, 6, 8)
    rows = imperfect_experiment(s, imperfect_params(s), 5, 1, checks=500)
    assert all(ok and acc >= 0.7 for ok, acc in rows)

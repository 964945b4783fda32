import pytest
from hypothesis import given
from hypothesis import strategies as st

from otslab.runner import binomial_sigma, chunked, map_trials, trial_seed, trial_seeds, wilson


@given(st.integers(0, 2**64 - 1), st.integers(0, 10**6))
def test_trial_seed_is_stable_and_64_bit(master, i):
    s = trial_seed(master, i)
    assert s == trial_seed(master, i) and 0 <= s < 2**64


def test_trial_seeds_distinct():
    seeds = trial_seeds(1, 1000)
    assert len(set(seeds)) == 1000
    assert trial_seed(1, 0, "a") != trial_seed(1, 0, "b")


@given(st.integers(0, 200).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))))
def test_wilson_contains_point_estimate(sn):
    s, n = sn
    lo, hi = wilson(s, n)
    assert 0 <= lo <= hi <= 1
    if n:
        assert lo <= s / n <= hi


def test_wilson_reference_value():
    # 8/10 at 95%: the textbook Wilson interval is (0.4902, 0.9433)
    lo, hi = wilson(8, 10)
    assert lo == pytest.approx(0.4902, abs=1e-4) and hi == pytest.approx(0.9433, abs=1e-4)


def test_sigma():
    assert binomial_sigma(0.5, 100) == pytest.approx(0.05)
    assert binomial_sigma(0.5, 0) == 0.0


def _square(x):
    return x * x


def test_map_trials_order_independent_of_jobs():
    args = list(range(20))
    assert map_trials(_square, args, 1) == map_trials(_square, args, 2) == [x * x for x in args]


def test_chunked():
    assert chunked(range(5), 2) == [[0, 1], [2, 3], [4]]

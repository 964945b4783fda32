import itertools
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from otslab.combinatorics import (
    SetPairFamily,
    binary_entropy,
    binom,
    cross_intersecting_check,
    family_bound_search,
    half_binom,
    max_family_construct,
    max_family_exhaustive,
    random_order_event_rate,
    search_rows_csv,
    subset_rank,
    subset_unrank,
)


def test_binomials():
    assert binom(6, 2) == 15 and half_binom(8) == 70 and half_binom(5) == 10
    with pytest.raises(ValueError):
        binom(3, 4)


def test_entropy():
    assert binary_entropy(0.5) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        binary_entropy(0.0)


@given(st.integers(1, 10).flatmap(lambda k: st.tuples(st.just(k), st.integers(0, k))))
def test_unrank_is_lexicographic_bijection(kt):
    k, t = kt
    expected = list(itertools.combinations(range(k), t))
    got = [subset_unrank(i, k, t) for i in range(math.comb(k, t))]
    assert got == expected
    assert [subset_rank(s, k) for s in got] == list(range(len(got)))


def test_unrank_range():
    with pytest.raises(ValueError):
        subset_unrank(15, 6, 2)


def test_cross_check_examples():
    assert cross_intersecting_check(SetPairFamily(3, [({0}, {1})]))
    fam = max_family_construct(4)
    assert fam.K == 6 and cross_intersecting_check(fam)
    bad = SetPairFamily(3, [({0}, {1}), ({0}, {1})])
    res = cross_intersecting_check(bad)
    assert not res.ok and res.witness == (0, 1)


@pytest.mark.parametrize("q", [2, 3, 4, 5, 6])
def test_construction_is_extremal_and_valid(q):
    fam = max_family_construct(q)
    assert fam.K == half_binom(q) and fam.q == q
    check = cross_intersecting_check(fam)
    assert check.ok and check.normalized_ok


@pytest.mark.parametrize("q,best", [(1, 1), (2, 2), (3, 3)])
def test_exhaustive_maximum(q, best):
    assert max_family_exhaustive(q) == best


def test_random_search_respects_bound():
    res = family_bound_search(4, 500, 1)
    assert not res.violated and res.best_K <= 6
    assert "q,K_found,bound" in search_rows_csv([res])


def test_random_order_rate():
    # P[u before v] for single elements is 1/2; for |U|=|V|=2 it is 1/C(4,2)
    assert random_order_event_rate([0], [1], range(2), 4000, 1) == pytest.approx(0.5, abs=0.05)
    assert random_order_event_rate([0, 1], [2, 3], range(4), 6000, 2) == pytest.approx(1 / 6, abs=0.03)

"""Tests of multi-index enumeration, ranking and weights."""

import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chaosbsde.basis import ChaosBasisSpec
from chaosbsde.errors import ConfigurationError, ResourceLimitError
from chaosbsde.multiindex import (
    MultiIndex,
    enumerate_universe,
    factorial_weight,
    universe_size,
)

PARAM_GRID = [
    (d, N, p)
    for d in (1, 2, 5)
    for N in (5, 10, 20)
    for p in (1, 2, 3)
    if N >= d * p
]


def test_small_universe_exact_order():
    uni = enumerate_universe(ChaosBasisSpec(T=1.0, N=2, d=1, p=2))
    rows = [tuple(int(v) for v in row) for row in uni.flat]
    assert rows == [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


def test_universe_size_20_2():
    uni = enumerate_universe(ChaosBasisSpec(T=1.0, N=20, d=1, p=2))
    # N singles + N(N-1)/2 pairs + N doubles
    assert len(uni) == 20 + 190 + 20 == 230
    degrees = uni.flat.sum(axis=1)
    assert int((degrees == 1).sum()) == 20
    n_pairs = sum(1 for row in uni.flat if (row == 1).sum() == 2)
    n_doubles = sum(1 for row in uni.flat if (row == 2).sum() == 1)
    assert n_pairs == 190 and n_doubles == 20


def test_single_slot_single_degree():
    uni = enumerate_universe(ChaosBasisSpec(T=1.0, N=1, d=1, p=1))
    assert len(uni) == 1
    assert tuple(uni.flat[0]) == (1,)


def brute_force_count(n_slots: int, p: int) -> int:
    count = 0
    for combo in itertools.product(range(p + 1), repeat=n_slots):
        if 1 <= sum(combo) <= p:
            count += 1
    return count


@pytest.mark.parametrize("d,N,p", [(1, 5, 2), (2, 5, 2), (1, 4, 3), (3, 3, 1)])
def test_count_against_brute_force(d, N, p):
    uni = enumerate_universe(ChaosBasisSpec(T=1.0, N=N, d=d, p=p))
    assert len(uni) == brute_force_count(d * N, p)


@pytest.mark.parametrize("d,N,p", PARAM_GRID)
def test_count_formula(d, N, p):
    basis = ChaosBasisSpec(T=1.0, N=N, d=d, p=p)
    expected = sum(comb(d * N + k - 1, k) for k in range(1, p + 1))
    assert universe_size(basis) == expected
    assert len(enumerate_universe(basis)) == expected


@pytest.mark.parametrize("d,N,p", PARAM_GRID)
def test_rank_unrank_bijection(d, N, p):
    uni = enumerate_universe(ChaosBasisSpec(T=1.0, N=N, d=d, p=p))
    step = max(1, len(uni) // 400)  # subsample large universes
    for r in range(0, len(uni), step):
        assert uni.rank(uni.unrank(r)) == r
    assert uni.rank(uni.unrank(len(uni) - 1)) == len(uni) - 1


def test_canonical_order_is_stable():
    basis = ChaosBasisSpec(T=1.0, N=10, d=2, p=2)
    first = enumerate_universe(basis)
    serialized = first.flat.tobytes()
    again = enumerate_universe(basis)
    assert again.flat.tobytes() == serialized


def test_degree_bounds_and_birth():
    uni = enumerate_universe(ChaosBasisSpec(T=1.0, N=6, d=2, p=3))
    assert (uni.degree >= 1).all() and (uni.degree <= 3).all()
    for rank in range(0, len(uni), 7):
        mi = uni.unrank(rank)
        steps = np.flatnonzero(mi.degrees.any(axis=0))
        assert uni.birth[rank] == steps.max() + 1


def test_factorial_weight_values():
    ones = MultiIndex(np.array([[1, 0, 1], [0, 1, 0]]))
    assert factorial_weight(ones) == 1
    single2 = MultiIndex(np.array([[0, 2, 0]]))
    assert factorial_weight(single2) == 2
    mixed = MultiIndex(np.array([[3, 2]]))
    assert factorial_weight(mixed) == 12


@given(st.lists(st.integers(0, 4), min_size=2, max_size=8))
def test_factorial_weight_matches_product(degrees):
    import math

    mi = MultiIndex(np.array([degrees]))
    assert factorial_weight(mi) == math.prod(math.factorial(c) for c in degrees)


def test_weights_vector_matches_op():
    uni = enumerate_universe(ChaosBasisSpec(T=1.0, N=4, d=1, p=3))
    for rank in range(len(uni)):
        assert uni.weights[rank] == factorial_weight(uni.unrank(rank))


def test_unit_rank():
    uni = enumerate_universe(ChaosBasisSpec(T=1.0, N=5, d=2, p=2))
    for component in (1, 2):
        for step in (1, 3, 5):
            rank = uni.unit_rank(component, step)
            mi = uni.unrank(rank)
            assert mi.degree == 1
            assert mi.degrees[component - 1, step - 1] == 1


def test_grid_too_coarse_rejected():
    with pytest.raises(ConfigurationError):
        ChaosBasisSpec(T=1.0, N=5, d=2, p=3)  # N < d*p


def test_universe_cap():
    with pytest.raises(ResourceLimitError):
        enumerate_universe(ChaosBasisSpec(T=1.0, N=20, d=1, p=2), max_size=100)


def test_rank_of_foreign_index_rejected():
    uni = enumerate_universe(ChaosBasisSpec(T=1.0, N=3, d=1, p=2))
    with pytest.raises(KeyError):
        uni.rank(MultiIndex(np.array([[3, 0, 0]])))  # degree above p

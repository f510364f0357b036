import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from starkprobe.basis import BINOM, build_basis, rank
from starkprobe.errors import InvalidArgumentsError, NotInSectorError


def brute_states(L, N):
    return sorted(sum(1 << b for b in c) for c in itertools.combinations(range(L), N))


@pytest.mark.parametrize("L,N", [(2, 1), (4, 2), (8, 4), (10, 3), (12, 6), (6, 0), (6, 6)])
def test_states_match_brute_force(L, N):
    b = build_basis(L, N)
    assert b.dim == math.comb(L, N) == len(b)
    assert b.states.tolist() == brute_states(L, N)


def test_states_strictly_increasing_and_read_only():
    b = build_basis(16, 8)
    assert np.all(np.diff(b.states.astype(np.int64)) > 0)
    with pytest.raises(ValueError):
        b.states[0] = 0


@given(st.integers(2, 14).flatmap(lambda L: st.tuples(st.just(L), st.integers(0, L))))
@settings(max_examples=60, deadline=None)
def test_rank_inverts_enumeration(LN):
    L, N = LN
    b = build_basis(L, N)
    for i, m in enumerate(b.states[:50]):
        assert rank(b, int(m)) == i
    assert np.array_equal(b.ranks(b.states), np.arange(b.dim))


def test_binomial_table():
    for n in range(33):
        for k in range(n + 2):
            assert BINOM[n, k] == math.comb(n, k)


def test_large_sector_dimension_without_enumeration():
    assert build_basis(32, 16).dim == 601080390


@pytest.mark.parametrize("L,N", [(1, 0), (33, 1), (5, 6), (5, -1)])
def test_invalid_sizes(L, N):
    with pytest.raises(InvalidArgumentsError):
        build_basis(L, N)


def test_rank_rejects_foreign_masks():
    b = build_basis(6, 3)
    with pytest.raises(NotInSectorError):
        rank(b, 0b1111)
    with pytest.raises(NotInSectorError):
        rank(b, 0b1000011)
    with pytest.raises(NotInSectorError):
        b.index_of(-1)


def test_rank_identity_exhaustive_up_to_twelve_sites():
    for L in range(2, 13):
        for N in range(L + 1):
            b = build_basis(L, N)
            assert [rank(b, int(m)) for m in b.states] == list(range(b.dim))

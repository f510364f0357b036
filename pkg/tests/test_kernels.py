"""The compiled kernels and the numpy fallback must agree bit for bit."""
import math
import os

import numpy as np
import pytest

from starkprobe import _kernels_py as py
from starkprobe._backend import BACKEND
from starkprobe.basis import BINOM
from starkprobe.hamiltonian import coupling

cy = pytest.importorskip("starkprobe._kernels", reason="compiled extension not built")

CASES = [(2, 1), (6, 0), (6, 6), (9, 4), (12, 6), (14, 3)]


def test_backend_selection():
    assert BACKEND == ("python" if os.environ.get("STARKPROBE_PURE_PYTHON") else "cython")


@pytest.mark.parametrize("L,N", CASES)
def test_enumeration_and_rank(L, N):
    dim = math.comb(L, N)
    a = cy.enumerate_states(L, N, dim)
    b = py.enumerate_states(L, N, dim)
    assert np.array_equal(a, b)
    assert np.array_equal(cy.rank_states(a, L, BINOM), py.rank_states(b, L, BINOM))


@pytest.mark.parametrize("L,N", CASES)
@pytest.mark.parametrize("eta", [0.0, 0.5, 1.0, math.inf])
def test_diagonal_and_hops(L, N, eta):
    states = py.enumerate_states(L, N, math.comb(L, N))
    c = np.array([0.0] + [coupling(eta, d) for d in range(1, L)])
    for x, y in zip(cy.diagonal_terms(states, L, c), py.diagonal_terms(states, L, c)):
        assert np.array_equal(x, y)
    for x, y in zip(cy.hop_structure(states, L, BINOM), py.hop_structure(states, L, BINOM)):
        assert np.array_equal(x, y)


@pytest.mark.parametrize("L,N", CASES)
def test_matvec(L, N):
    states = py.enumerate_states(L, N, math.comb(L, N))
    indptr, indices = py.hop_structure(states, L, BINOM)
    rng = np.random.default_rng(L * 31 + N)
    diag = rng.standard_normal(len(states))
    v = rng.standard_normal(len(states))
    a, b = np.empty_like(v), np.empty_like(v)
    cy.apply_hamiltonian(diag, indptr, indices, 2.6, v, a)
    py.apply_hamiltonian(diag, indptr, indices, 2.6, v, b)
    assert np.allclose(a, b, rtol=0, atol=1e-13)

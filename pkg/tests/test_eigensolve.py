import numpy as np
import pytest
import scipy.linalg as sla

from starkprobe.eigensolve import (
    DENSE_SOLVER_MAX_DIM,
    degeneracy_tolerance,
    gap,
    ground_state,
    start_vector,
)
from starkprobe.errors import InvalidArgumentsError
from starkprobe.hamiltonian import ProbeParams, SectorOperator, build_operator, dense_matrix


@pytest.mark.parametrize("L,N,eta,h", [(8, 4, 1.0, 0.1), (12, 6, 0.0, 0.3), (12, 4, 5.0, 1e-3), (13, 4, 2.0, 0.5)])
def test_matches_lapack(L, N, eta, h):
    op = build_operator(ProbeParams(L, N, eta, 1.0, h))
    w, v = sla.eigh(dense_matrix(op), subset_by_index=[0, 1])
    sol = ground_state(op, tol=1e-12)
    assert sol.method == ("dense" if op.dim <= DENSE_SOLVER_MAX_DIM else "lanczos")
    assert sol.energy0 == pytest.approx(w[0], abs=1e-10)
    assert sol.gap == pytest.approx(w[1] - w[0], abs=1e-9)
    assert abs(abs(sol.vector0 @ v[:, 0]) - 1) < 1e-12
    assert sol.residual <= 1e-12
    assert not sol.degenerate_flag


def test_sign_convention_and_determinism():
    op = build_operator(ProbeParams(14, 7, 1.0, 1.0, 0.2))
    a = ground_state(op, seed=5)
    b = ground_state(op, seed=5)
    assert np.array_equal(a.vector0, b.vector0)
    assert a.vector0[np.argmax(np.abs(a.vector0))] > 0
    assert not a.vector0.flags.writeable


def test_start_vector_seeded():
    assert np.array_equal(start_vector(10, 3), start_vector(10, 3))
    assert not np.array_equal(start_vector(10, 3), start_vector(10, 4))


def test_one_dimensional_sector_has_no_gap():
    op = build_operator(ProbeParams(2, 0, 1.0))
    sol = ground_state(op)
    assert sol.energy1 is None and sol.gap is None
    with pytest.raises(InvalidArgumentsError):
        gap(op)


def _diagonal_operator(values):
    base = build_operator(ProbeParams(len(values), 1, 1.0))
    diag = np.array(values, dtype=float)
    empty = (np.zeros(len(values) + 1, dtype=np.int64), np.zeros(0, dtype=np.int64))
    return SectorOperator(base.params, base.basis, diag, empty)


def test_degeneracy_flagged():
    sol = ground_state(_diagonal_operator([1.0, 0.5, 0.5 + 1e-12]))
    assert sol.degenerate_flag
    sol = ground_state(_diagonal_operator([1.0, 0.5, 0.5 + 1e-6]))
    assert not sol.degenerate_flag
    assert sol.gap > degeneracy_tolerance(sol.energy0)


def test_invalid_tolerance():
    with pytest.raises(InvalidArgumentsError):
        ground_state(build_operator(ProbeParams(4, 2, 1.0)), tol=0)

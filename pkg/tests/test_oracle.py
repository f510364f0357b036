import math

import numpy as np
import pytest

from starkprobe import oracle
from starkprobe.basis import build_basis
from starkprobe.errors import TooLargeError
from starkprobe.hamiltonian import ProbeParams, build_operator, dense_matrix


def test_full_space_matrix_is_real_symmetric():
    ref = oracle.dense_full_hamiltonian(ProbeParams(5, 0, 1.0, 0.8, 0.2))
    m = ref.matrix.toarray()
    assert m.shape == (32, 32)
    assert np.array_equal(m, m.T)


def test_sector_indices_partition_the_space():
    ref = oracle.dense_full_hamiltonian(ProbeParams(6, 0, 2.0))
    idx = np.concatenate([ref.sector_indices(n) for n in range(7)])
    assert sorted(idx.tolist()) == list(range(64))
    assert ref.sector_indices(3).tolist() == build_basis(6, 3).states.tolist()


def test_block_off_sector_entries_vanish():
    ref = oracle.dense_full_hamiltonian(ProbeParams(5, 0, 0.5, 1.0, 0.3))
    m = ref.matrix.toarray()
    pop = np.array([bin(i).count("1") for i in range(32)])
    assert np.all(m[pop[:, None] != pop[None, :]] == 0)


@pytest.mark.parametrize("eta", [0, 1, math.inf])
def test_sector_blocks_match(eta):
    params = ProbeParams(7, 3, eta, 1.1, 0.25)
    ref = oracle.dense_full_hamiltonian(params)
    assert np.array_equal(dense_matrix(build_operator(params)), ref.sector_block(3))


def test_two_level_closed_form_values():
    cf = oracle.two_level_closed_form(1.0, 0.0)
    assert cf["energy0"] == -3.0 and cf["gap"] == 4.0 and cf["qfi"] == 0.25


def test_qfi_by_differentiation_two_level():
    for h in (0.0, 0.5, 3.0):
        got = oracle.qfi_by_differentiation(ProbeParams(2, 1, 1.0, 1.0, h))
        assert got == pytest.approx(oracle.two_level_closed_form(1.0, h)["qfi"], rel=1e-6)


def test_oracle_size_cap():
    with pytest.raises(TooLargeError):
        oracle.dense_full_hamiltonian(ProbeParams(13, 0, 1.0))

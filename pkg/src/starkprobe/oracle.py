"""Brute-force reference implementations used to check the fast paths.

Nothing here touches the bitmask kernels: the full 2^L-dimensional Hamiltonian
is assembled from explicit Pauli tensor products, sectors are cut out by
counting excitations in the full basis, and the QFI is taken from a numerical
derivative of the state rather than from fidelities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps

from .errors import DegenerateGroundStateError, TooLargeError

ORACLE_MAX_SITES = 12

# Local basis ordered (down, up): local index 1 is an excitation, so the
# full-space index of a product state equals its bitmask when site 1 is the
# least significant factor.
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, 1j], [-1j, 0]], dtype=complex)
_Z = np.array([[-1, 0], [0, 1]], dtype=complex)
_I = np.eye(2, dtype=complex)


def _site_operator(op: np.ndarray, site: int, L: int) -> sps.csr_matrix:
    """``op`` on ``site`` (1-based), identity elsewhere."""
    out = sps.identity(1, dtype=complex, format="csr")
    # kron(A, B): A is the more significant factor, so go from site L down to 1
    for s in range(L, 0, -1):
        out = sps.kron(out, op if s == site else _I, format="csr")
    return out


@dataclass(frozen=True)
class DenseReference:
    L: int
    eta: float
    J: float
    h: float
    matrix: sps.csr_matrix  # real, 2^L x 2^L
    sz: sps.csr_matrix

    def sector_indices(self, N: int) -> np.ndarray:
        """Full-space indices with N excitations, in increasing order."""
        idx = np.arange(2**self.L)
        pop = np.array([int(i).bit_count() for i in idx])
        return idx[pop == N]

    def sector_block(self, N: int) -> np.ndarray:
        sel = self.sector_indices(N)
        return self.matrix[sel][:, sel].toarray()

    def commutator_norm(self) -> float:
        c = self.matrix @ self.sz - self.sz @ self.matrix
        return float(abs(c).max()) if c.nnz else 0.0


def _zz_amplitude(eta: float, d: int) -> float:
    # written independently of hamiltonian.coupling
    if math.isinf(eta):
        return float(d == 1)
    return 1.0 / d**eta if eta else 1.0


def dense_full_hamiltonian(params) -> DenseReference:
    L, eta, J, h = params.L, params.eta, params.J, params.h
    if L > ORACLE_MAX_SITES:
        raise TooLargeError(f"oracle limited to L <= {ORACLE_MAX_SITES}, got {L}")
    X = [None] + [_site_operator(_X, i, L) for i in range(1, L + 1)]
    Y = [None] + [_site_operator(_Y, i, L) for i in range(1, L + 1)]
    Z = [None] + [_site_operator(_Z, i, L) for i in range(1, L + 1)]
    dim = 2**L

    hop = sps.csr_matrix((dim, dim), dtype=complex)
    for i in range(1, L):
        hop = hop + (X[i] @ X[i + 1] + Y[i] @ Y[i + 1])
    zz = sps.csr_matrix((dim, dim), dtype=complex)
    for i in range(1, L + 1):
        for j in range(i + 1, L + 1):
            zz = zz + _zz_amplitude(eta, j - i) * (Z[i] @ Z[j])
    ramp = sps.csr_matrix((dim, dim), dtype=complex)
    for i in range(1, L + 1):
        ramp = ramp + i * Z[i]
    full = J * hop + zz + h * ramp
    if full.nnz and abs(full.imag).max() > 0:
        raise AssertionError("Hamiltonian has an imaginary part")
    sz = 0.5 * sum(Z[1:], sps.csr_matrix((dim, dim), dtype=complex))
    return DenseReference(L, eta, J, h, sps.csr_matrix(full.real), sps.csr_matrix(sz.real))


def _ground_vector(block: np.ndarray) -> tuple[np.ndarray, float]:
    w, v = np.linalg.eigh(block)
    gap = w[1] - w[0] if len(w) > 1 else math.inf
    if gap < 1e-10 * max(1.0, abs(w[0])):
        raise DegenerateGroundStateError(f"ground state degenerate (gap {gap:.3e})")
    return v[:, 0], gap


def qfi_by_differentiation(params, delta_h: float = 1e-4) -> float:
    """4(<d psi|d psi> - |<psi|d psi>|^2) with a central-difference derivative."""
    blocks = {}
    for s in (-1, 0, 1):
        p = params._probe(params.h + s * delta_h)
        blocks[s] = dense_full_hamiltonian(p).sector_block(params.N)
    psi, _ = _ground_vector(blocks[0])
    plus, _ = _ground_vector(blocks[1])
    minus, _ = _ground_vector(blocks[-1])
    plus *= np.sign(psi @ plus)
    minus *= np.sign(psi @ minus)
    dpsi = (plus - minus) / (2 * delta_h)
    return float(4 * (dpsi @ dpsi - (psi @ dpsi) ** 2))


def two_level_closed_form(J: float, h: float) -> dict[str, float]:
    """Exact L=2, N=1 values: energies, gap and Fisher information."""
    root = math.sqrt(4 * J * J + h * h)
    return {
        "energy0": -1.0 - root,
        "energy1": -1.0 + root,
        "gap": 2.0 * root,
        "qfi": 4 * J * J / (4 * J * J + h * h) ** 2,
    }

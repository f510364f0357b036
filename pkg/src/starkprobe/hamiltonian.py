"""Long-range Stark Hamiltonian restricted to one excitation sector.

    H(h) = J sum_{i=1}^{L-1} (X_i X_{i+1} + Y_i Y_{i+1})
           + sum_{i<j} |i-j|^{-eta} Z_i Z_j + h sum_{i=1}^{L} i Z_i

Open boundaries. The exchange term swaps an anti-aligned neighbouring pair
with amplitude 2J; the ZZ and field terms are diagonal in the bitmask basis.
The ZZ term carries no factor of J.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._backend import kernels
from .basis import BINOM, SectorBasis, build_basis
from .errors import DimensionMismatchError, InvalidArgumentsError, TooLargeError

DENSE_MAX_DIM = 4096


def parse_eta(value) -> float:
    """Accept floats or the literal ``"inf"`` (nearest-neighbour limit)."""
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "infinity", "+inf"):
            return math.inf
        try:
            value = float(text)
        except ValueError:
            raise InvalidArgumentsError(f"cannot parse eta {value!r}") from None
    value = float(value)
    if math.isnan(value) or value < 0:
        raise InvalidArgumentsError(f"eta must be >= 0 or 'inf', got {value}")
    return value


def format_eta(eta: float) -> str:
    return "inf" if math.isinf(eta) else repr(float(eta))


def coupling(eta: float, d: int) -> float:
    """ZZ amplitude between sites a distance ``d`` apart."""
    if d < 1:
        raise InvalidArgumentsError(f"distance must be >= 1, got {d}")
    if math.isinf(eta):
        return 1.0 if d == 1 else 0.0
    if eta == 0:
        return 1.0
    return 1.0 / float(d) ** eta


@dataclass(frozen=True)
class ProbeParams:
    L: int
    N: int
    eta: float
    J: float = 1.0
    h: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "eta", parse_eta(self.eta))
        object.__setattr__(self, "J", float(self.J))
        object.__setattr__(self, "h", float(self.h))
        if not (self.J > 0 and math.isfinite(self.J)):
            raise InvalidArgumentsError(f"J must be positive, got {self.J}")
        if not (self.h >= 0 and math.isfinite(self.h)):
            raise InvalidArgumentsError(f"h must be finite and >= 0, got {self.h}")
        build_basis(self.L, self.N)

    @property
    def filling(self) -> float:
        return self.N / self.L

    def with_h(self, h: float) -> "ProbeParams":
        return ProbeParams(self.L, self.N, self.eta, self.J, h)

    def _probe(self, h: float) -> "ProbeParams":
        # finite-difference stencils may step below h = 0; skip validation there
        p = object.__new__(ProbeParams)
        for name, val in (("L", self.L), ("N", self.N), ("eta", self.eta), ("J", self.J), ("h", float(h))):
            object.__setattr__(p, name, val)
        return p


@dataclass(frozen=True)
class SectorStructure:
    """h-independent pieces of the sector Hamiltonian, shared between fields."""

    basis: SectorBasis
    eta: float
    zz: np.ndarray
    field_weights: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray


@lru_cache(maxsize=32)
def sector_structure(L: int, N: int, eta: float) -> SectorStructure:
    basis = build_basis(L, N)
    couplings = np.array([0.0] + [coupling(eta, d) for d in range(1, L)])
    states = np.ascontiguousarray(basis.states)
    zz, fw = kernels.diagonal_terms(states, L, couplings)
    indptr, indices = kernels.hop_structure(states, L, BINOM)
    for arr in (zz, fw, indptr, indices):
        arr.setflags(write=False)
    return SectorStructure(basis, eta, zz, fw, indptr, indices)


@dataclass(frozen=True)
class SectorOperator:
    params: ProbeParams
    basis: SectorBasis
    diag: np.ndarray
    hop_table: tuple = field(repr=False)

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def hop_amplitude(self) -> float:
        return 2.0 * self.params.J

    def matvec(self, v: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        if out is None:
            out = np.empty(self.dim)
        indptr, indices = self.hop_table
        kernels.apply_hamiltonian(self.diag, indptr, indices, self.hop_amplitude, v, out)
        return out


def _operator(params: ProbeParams, structure: SectorStructure) -> SectorOperator:
    diag = structure.zz + params.h * structure.field_weights
    diag.setflags(write=False)
    return SectorOperator(params, structure.basis, diag, (structure.indptr, structure.indices))


def build_operator(params: ProbeParams, basis: SectorBasis | None = None) -> SectorOperator:
    if basis is not None and (basis.L, basis.N) != (params.L, params.N):
        raise DimensionMismatchError(
            f"basis (L={basis.L}, N={basis.N}) does not match params (L={params.L}, N={params.N})"
        )
    return _operator(params, sector_structure(params.L, params.N, params.eta))


def apply_h(op: SectorOperator, v) -> np.ndarray:
    v = np.ascontiguousarray(v, dtype=np.float64)
    if v.shape != (op.dim,):
        raise DimensionMismatchError(f"vector of shape {v.shape}, operator dimension {op.dim}")
    return op.matvec(v)


def dense_matrix(op: SectorOperator) -> np.ndarray:
    if op.dim > DENSE_MAX_DIM:
        raise TooLargeError(f"dense form capped at dim {DENSE_MAX_DIM}, got {op.dim}")
    indptr, indices = op.hop_table
    m = np.diag(np.array(op.diag))
    rows = np.repeat(np.arange(op.dim), np.diff(indptr))
    m[rows, indices] = op.hop_amplitude
    return m

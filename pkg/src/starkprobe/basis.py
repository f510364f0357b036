"""Fixed-excitation sector of an L-site spin-1/2 chain.

Site ``i`` (counted from 1) is bit ``i - 1`` of an integer mask; a set bit is
an up spin (an excitation, sigma^z = +1). States are ordered by integer value,
and the position of a mask in that order is its combinadic (colex) rank, so
lookups need no hash table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._backend import kernels
from .errors import InvalidArgumentsError, NotInSectorError

MAX_SITES = 32


def _pascal(n_max: int) -> np.ndarray:
    table = np.zeros((n_max + 1, n_max + 2), dtype=np.int64)
    table[:, 0] = 1
    for n in range(1, n_max + 1):
        table[n, 1 : n + 1] = table[n - 1, 1 : n + 1] + table[n - 1, 0:n]
    return table


# BINOM[n, k] = C(n, k); one spare column so rank lookups at k = n + 1 read 0.
BINOM = _pascal(MAX_SITES)
BINOM.setflags(write=False)


@dataclass(frozen=True)
class SectorBasis:
    """Masks of an ``L``-site chain carrying exactly ``N`` excitations.

    ``states`` is built lazily, so the dimension of very large sectors can be
    queried without allocating them.
    """

    L: int
    N: int

    @property
    def dim(self) -> int:
        return math.comb(self.L, self.N)

    @property
    def filling(self) -> float:
        return self.N / self.L

    @cached_property
    def states(self) -> np.ndarray:
        out = kernels.enumerate_states(self.L, self.N, self.dim)
        out.setflags(write=False)
        return out

    def index_of(self, mask: int) -> int:
        return rank(self, mask)

    def ranks(self, masks) -> np.ndarray:
        """Vectorised :func:`rank` without the per-mask sector check."""
        masks = np.ascontiguousarray(masks, dtype=np.uint64)
        return kernels.rank_states(masks, self.L, BINOM)

    def __len__(self) -> int:
        return self.dim


def build_basis(L: int, N: int) -> SectorBasis:
    if not isinstance(L, (int, np.integer)) or not isinstance(N, (int, np.integer)):
        raise InvalidArgumentsError(f"L and N must be integers, got {L!r}, {N!r}")
    if not 2 <= L <= MAX_SITES:
        raise InvalidArgumentsError(f"L={L} outside supported range 2..{MAX_SITES}")
    if not 0 <= N <= L:
        raise InvalidArgumentsError(f"N={N} must satisfy 0 <= N <= L={L}")
    return SectorBasis(int(L), int(N))


def rank(basis: SectorBasis, mask: int) -> int:
    """Ordinal of ``mask`` in ``basis.states``."""
    mask = int(mask)
    if mask < 0 or mask >> basis.L:
        raise NotInSectorError(f"mask {mask:#b} does not fit in {basis.L} sites")
    if mask.bit_count() != basis.N:
        raise NotInSectorError(
            f"mask {mask:#b} has {mask.bit_count()} excitations, sector has {basis.N}"
        )
    r = 0
    t = 0
    for pos in range(basis.L):
        if (mask >> pos) & 1:
            t += 1
            r += math.comb(pos, t)
    return r

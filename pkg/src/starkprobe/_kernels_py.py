"""Numpy fallback for the compiled kernels in ``_kernels.pyx``.

Signatures and results match the Cython module (the matvec may differ in the
last bit because of summation order).
"""
from itertools import combinations

import numpy as np


def enumerate_states(L, N, dim):
    if dim == 0:
        return np.empty(0, dtype=np.uint64)
    out = np.fromiter(
        (sum(1 << i for i in c) for c in combinations(range(L), N)),
        dtype=np.uint64,
        count=dim,
    )
    out.sort()
    return out


def _bits(masks, L):
    return ((masks[:, None] >> np.arange(L, dtype=np.uint64)) & np.uint64(1)).astype(np.int64)


def rank_states(masks, L, binom):
    masks = np.asarray(masks, dtype=np.uint64)
    bits = _bits(masks, L)
    counts = np.cumsum(bits, axis=1)
    pos = np.broadcast_to(np.arange(L), bits.shape)
    return np.where(bits == 1, binom[pos, counts], 0).sum(axis=1).astype(np.int64)


def diagonal_terms(states, L, coupling):
    z = 2.0 * _bits(np.asarray(states, dtype=np.uint64), L) - 1.0
    zz = np.zeros(len(states))
    for i in range(L):
        for j in range(i + 1, L):
            zz = zz + coupling[j - i] * z[:, i] * z[:, j]
    field = (z.astype(np.int64) * np.arange(1, L + 1)).sum(axis=1).astype(np.float64)
    return zz, field


def hop_structure(states, L, binom):
    states = np.asarray(states, dtype=np.uint64)
    n = len(states)
    rows, cols, bonds = [], [], []
    for i in range(L - 1):
        flip = np.uint64(3 << i)
        active = (((states >> np.uint64(i)) ^ (states >> np.uint64(i + 1))) & np.uint64(1)).astype(bool)
        k = np.nonzero(active)[0]
        rows.append(k)
        cols.append(rank_states(states[k] ^ flip, L, binom))
        bonds.append(np.full(len(k), i))
    if rows:
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        bonds = np.concatenate(bonds)
    else:
        rows = cols = bonds = np.empty(0, dtype=np.int64)
    order = np.lexsort((bonds, rows))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    return indptr, cols[order].astype(np.int64)


def apply_hamiltonian(diag, indptr, indices, amp, v, out):
    out[:] = diag * v
    if len(indices):
        counts = np.diff(indptr)
        starts = np.minimum(indptr[:-1], len(indices) - 1)
        sums = np.add.reduceat(v[indices], starts)
        sums[counts == 0] = 0.0
        out += amp * sums

"""Lowest eigenpairs of a sector Hamiltonian.

Small sectors go to LAPACK; larger ones to ARPACK's implicitly restarted
Lanczos through a matrix-free ``LinearOperator``. Both paths return the ground
vector with a fixed sign: its largest-magnitude entry is positive.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, InvalidArgumentsError
from .hamiltonian import SectorOperator, dense_matrix

DENSE_SOLVER_MAX_DIM = 128
DEFAULT_SEED = 20231
DEFAULT_TOL = 1e-10
MATVEC_CAP = 200_000


@dataclass(frozen=True)
class GroundSolution:
    energy0: float
    energy1: float | None
    vector0: np.ndarray = field(repr=False)
    residual: float
    iterations: int
    degenerate_flag: bool
    seed: int
    method: str

    @property
    def gap(self) -> float | None:
        return None if self.energy1 is None else self.energy1 - self.energy0


def degeneracy_tolerance(energy0: float) -> float:
    return 1e-10 * max(1.0, abs(energy0))


def start_vector(dim: int, seed: int = DEFAULT_SEED) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal(dim)


def _fix_sign(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return v


def _dense(op: SectorOperator, want_gap: bool):
    m = dense_matrix(op)
    hi = min(1, op.dim - 1) if want_gap else 0
    w, v = sla.eigh(m, subset_by_index=[0, hi])
    return w, v[:, 0], 0


def _lanczos(op: SectorOperator, want_gap: bool, tol: float, seed: int, max_matvecs: int):
    dim = op.dim
    count = [0]

    def matvec(x):
        count[0] += 1
        return op.matvec(np.ascontiguousarray(x, dtype=np.float64).ravel())

    a = spla.LinearOperator((dim, dim), matvec=matvec, dtype=np.float64)
    # ARPACK stops on ||r|| <= tol_arpack * |lambda|; bound |lambda| by Gershgorin
    indptr = op.hop_table[0]
    radius = float(np.max(np.abs(op.diag))) + op.hop_amplitude * float(np.max(np.diff(indptr), initial=0))
    k = 2 if want_gap else 1
    ncv = min(dim, 24)
    v0 = start_vector(dim, seed)
    arpack_tol = 0.1 * tol / max(radius, 1.0)
    for attempt in range(3):
        try:
            w, v = spla.eigsh(
                a, k=k, which="SA", v0=v0, tol=arpack_tol, ncv=ncv,
                maxiter=max(1, max_matvecs // ncv),
            )
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(
                f"Lanczos did not converge after {count[0]} matvecs", iterations=count[0]
            ) from exc
        order = np.argsort(w)
        w, v = w[order], v[:, order]
        vec = v[:, 0] / np.linalg.norm(v[:, 0])
        res = float(np.linalg.norm(op.matvec(vec) - w[0] * vec))
        if res <= tol:
            return w, vec, count[0]
        arpack_tol *= 1e-2
        v0 = vec
        ncv = min(dim, ncv + 16)
    raise ConvergenceError(
        f"residual {res:.3e} above tolerance {tol:.1e}", residual=res, iterations=count[0]
    )


def ground_state(
    op: SectorOperator,
    tol: float = DEFAULT_TOL,
    want_gap: bool = True,
    seed: int = DEFAULT_SEED,
    max_matvecs: int | None = None,
) -> GroundSolution:
    """Lowest eigenpair (and second eigenvalue when ``want_gap``) of ``op``."""
    if not tol > 0:
        raise InvalidArgumentsError(f"tol must be positive, got {tol}")
    dim = op.dim
    if dim < 1:
        raise InvalidArgumentsError("empty sector")
    if max_matvecs is None:
        max_matvecs = min(10 * dim, MATVEC_CAP)
    if dim <= DENSE_SOLVER_MAX_DIM:
        w, vec, iters = _dense(op, want_gap)
        method = "dense"
    else:
        w, vec, iters = _lanczos(op, want_gap, tol, seed, max(max_matvecs, 100))
        method = "lanczos"
    vec = _fix_sign(vec)
    vec.setflags(write=False)
    e0 = float(w[0])
    e1 = float(w[1]) if want_gap and len(w) > 1 else None
    residual = float(np.linalg.norm(op.matvec(vec) - e0 * vec))
    if residual > tol:
        raise ConvergenceError(f"residual {residual:.3e} above tolerance {tol:.1e}", residual, iters)
    degenerate = e1 is not None and (e1 - e0) < degeneracy_tolerance(e0)
    return GroundSolution(e0, e1, vec, residual, iters, degenerate, seed, method)


def gap(op: SectorOperator, tol: float = DEFAULT_TOL, seed: int = DEFAULT_SEED) -> float:
    if op.dim < 2:
        raise InvalidArgumentsError("gap needs a sector of dimension >= 2")
    sol = ground_state(op, tol=tol, want_gap=True, seed=seed)
    return max(sol.energy1 - sol.energy0, 0.0)

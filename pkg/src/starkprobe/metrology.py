"""Fidelity susceptibility, quantum and classical Fisher information of the
sector ground state with respect to the field amplitude h.

For pure states the fidelity is the absolute overlap, and

    chi = 2 (1 - |<psi(h)|psi(h + dh)>|) / dh^2,    F_Q = 4 chi.

For unit vectors 2(1 - |<a|b>|) = ||a - s b||^2 with s = sign<a|b>, and the
code evaluates the right-hand side: it carries the same value without the
catastrophic cancellation in 1 - |<a|b>| when dh is small.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .eigensolve import DEFAULT_SEED, GroundSolution, ground_state
from .errors import (
    ConvergenceError,
    DegenerateGroundStateError,
    InvalidArgumentsError,
    StepUnderflowError,
)
from .hamiltonian import ProbeParams, build_operator

QFI_TOL = 1e-12
STEP_FLOOR = 1e-12
REL_AGREEMENT = 1e-3
P_CUTOFF = 1e-14


@dataclass(frozen=True)
class FisherPoint:
    params: ProbeParams
    qfi: float
    cfi: float | None
    delta_h: float
    richardson_err: float
    valid: bool
    energy0: float = math.nan
    gap: float = math.nan
    residual: float = math.nan
    message: str = ""


def default_step(h: float) -> float:
    return max(1e-6, 1e-4 * max(h, 1e-3))


def _solve(params: ProbeParams, h: float, tol: float, seed: int) -> GroundSolution:
    sol = ground_state(build_operator(params._probe(h)), tol=tol, want_gap=True, seed=seed)
    if sol.degenerate_flag:
        raise DegenerateGroundStateError(
            f"degenerate ground state at h={h!r} (gap {sol.energy1 - sol.energy0:.3e})"
        )
    return sol


def susceptibility_from_states(psi_a, psi_b, delta_h: float) -> float:
    """chi from two (real) ground vectors separated by ``delta_h`` in field."""
    a = np.asarray(psi_a, dtype=float)
    b = np.asarray(psi_b, dtype=float)
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    s = 1.0 if a @ b >= 0 else -1.0
    d = a - s * b
    return float(d @ d) / delta_h**2


def fidelity_susceptibility(
    params: ProbeParams,
    delta_h: float,
    *,
    centered: bool = False,
    tol: float = QFI_TOL,
    seed: int = DEFAULT_SEED,
) -> float:
    """Forward (h, h+dh) or, with ``centered``, symmetric (h-dh/2, h+dh/2) chi."""
    if not delta_h > 0:
        raise InvalidArgumentsError(f"delta_h must be positive, got {delta_h}")
    if centered:
        lo, hi = params.h - delta_h / 2, params.h + delta_h / 2
    else:
        lo, hi = params.h, params.h + delta_h
    a = _solve(params, lo, tol, seed).vector0
    b = _solve(params, hi, tol, seed).vector0
    return susceptibility_from_states(a, b, delta_h)


def cfi_from_states(psi_minus, psi_0, psi_plus, delta_h: float) -> float:
    """Computational-basis CFI with a central difference over ``delta_h``."""
    p0 = np.asarray(psi_0) ** 2
    dp = (np.asarray(psi_plus) ** 2 - np.asarray(psi_minus) ** 2) / delta_h
    keep = p0 >= P_CUTOFF
    return float(np.sum(dp[keep] ** 2 / p0[keep]))


def cfi_computational(
    params: ProbeParams,
    delta_h: float,
    *,
    tol: float = QFI_TOL,
    seed: int = DEFAULT_SEED,
) -> float:
    """F_C for measuring every spin in the sigma^z basis, from h +- delta_h."""
    if not delta_h > 0:
        raise InvalidArgumentsError(f"delta_h must be positive, got {delta_h}")
    minus = _solve(params, params.h - delta_h, tol, seed).vector0
    centre = _solve(params, params.h, tol, seed).vector0
    plus = _solve(params, params.h + delta_h, tol, seed).vector0
    return cfi_from_states(minus, centre, plus, 2 * delta_h)


def qfi(
    params: ProbeParams,
    *,
    with_cfi: bool = False,
    delta_h: float | None = None,
    tol: float = QFI_TOL,
    seed: int = DEFAULT_SEED,
) -> FisherPoint:
    """F_Q = 4 chi with an adaptive step.

    chi is taken forward at steps dh and dh/2; the step is halved until the
    two agree to 1e-3 relative. The returned value is the Richardson
    extrapolation 2 chi(dh/2) - chi(dh) (the forward error is linear in dh);
    ``richardson_err`` is 4 |chi(dh) - chi(dh/2)|, the error bound of the
    unextrapolated dh/2 estimate. Degenerate or unconverged ground states give
    an invalid point instead of an exception.
    """
    step = default_step(params.h) if delta_h is None else float(delta_h)
    h = params.h
    try:
        base = _solve(params, h, tol, seed)
        far = _solve(params, h + step, tol, seed)
        while True:
            mid = _solve(params, h + step / 2, tol, seed)
            chi_full = susceptibility_from_states(base.vector0, far.vector0, step)
            chi_half = susceptibility_from_states(base.vector0, mid.vector0, step / 2)
            diff = abs(chi_full - chi_half)
            if diff <= REL_AGREEMENT * abs(chi_half) or diff == 0.0:
                break
            step /= 2
            if step < STEP_FLOOR:
                raise StepUnderflowError(
                    f"chi did not stabilise before the step reached {STEP_FLOOR:g} (h={h})"
                )
            far = mid
        value = max(4.0 * (2.0 * chi_half - chi_full), 0.0)
        cfi_value = None
        if with_cfi:
            minus = _solve(params, h - step / 2, tol, seed)
            cfi_value = cfi_from_states(minus.vector0, base.vector0, mid.vector0, step)
    except (DegenerateGroundStateError, ConvergenceError) as exc:
        return FisherPoint(params, math.nan, None, step, math.nan, False, message=str(exc))
    return FisherPoint(
        params,
        value,
        cfi_value,
        step,
        4.0 * diff,
        True,
        energy0=base.energy0,
        gap=base.energy1 - base.energy0,
        residual=base.residual,
    )

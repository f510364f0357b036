"""Quantum Fisher information of a long-range Stark chain by sector exact
diagonalization, with finite-size scaling of its critical exponents."""
from ._backend import BACKEND
from .basis import SectorBasis, build_basis, rank
from .criticality import (
    CollapseResult,
    FitResult,
    PeakResult,
    SweepRecord,
    check_scaling_relation,
    collapse,
    collapse_quality,
    find_peak,
    fit_alpha,
    fit_beta,
    fit_z,
    normalized_qfi_exponent,
)
from .eigensolve import GroundSolution, gap, ground_state
from .errors import *  # noqa: F401,F403
from .hamiltonian import ProbeParams, SectorOperator, apply_h, build_operator, dense_matrix
from .metrology import FisherPoint, cfi_computational, fidelity_susceptibility, qfi

__version__ = "0.1.0"

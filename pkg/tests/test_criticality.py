import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from starkprobe import criticality as crit
from starkprobe.errors import (
    DegenerateCollapseError,
    InsufficientDataError,
    InvalidArgumentsError,
    PeakAtBoundaryError,
)


def record(L, h, F, eta=0.0, valid=True):
    return crit.SweepRecord(eta, L, L // 2, h, F, F, 1.0, -1.0, 1e-6, 0.0, 0.0, valid)


def scaling_records(sizes, hs, h_c, alpha, nu, g=lambda x: 1 / (1 + x * x)):
    return [
        record(L, h, L ** (alpha / nu) * g(L ** (1 / nu) * (h - h_c)))
        for L in sizes
        for h in hs
    ]


# -- grids -------------------------------------------------------------------------


def test_log_grid():
    g = crit.log_grid(1e-5, 1.0, 25)
    assert len(g) == 126
    assert g[0] == pytest.approx(1e-5) and g[-1] == 1.0
    assert np.allclose(np.diff(np.log10(g)), 0.04)
    with pytest.raises(InvalidArgumentsError):
        crit.log_grid(0.0, 1.0, 10)


def test_densify_grid_adds_points_near_centre_only():
    g = crit.log_grid(1e-3, 1.0, 10)
    d = crit.densify_grid(g, 0.1, 10, 4)
    assert set(g) <= set(d)
    new = np.array(sorted(set(d) - set(g)))
    assert np.all(np.abs(np.log10(new) + 1) <= 0.5 + 1e-12)
    assert np.all(np.diff(d) > 0)
    assert np.array_equal(crit.densify_grid(g, 0.1, 10, 1), g)


# -- peaks -------------------------------------------------------------------------


@given(st.floats(-3.5, -0.5), st.floats(0.05, 0.6))
@settings(max_examples=40, deadline=None)
def test_golden_finds_lorentzian_maximum(centre, width):
    f = lambda h: 1 / (1 + ((math.log10(h) - centre) / width) ** 2)
    lo, hi = 10 ** (centre - 1), 10 ** (centre + 1.3)
    h, fv, (a, b), _ = crit.golden_maximize(f, lo, hi, 1e-6)
    assert math.log10(h) == pytest.approx(centre, abs=1e-5)
    assert (b - a) / h <= 1e-6


def test_transition_peak_skips_plateau_noise():
    f = np.array([5.0, 5.0 + 1e-7, 5.0, 4.0, 6.0, 7.0, 3.0, 1.0])
    assert crit.transition_peak_index(f) == 5
    assert crit.transition_peak_index(np.array([3.0, 2.0, 1.0])) is None


def test_global_vs_transition_mode():
    h = np.arange(1, 9, dtype=float)
    f = np.array([1.0, 9.0, 2.0, 3.0, 5.0, 4.0, 2.0, 1.0])
    assert crit.locate_coarse_peak(h, f, "global") == 1
    assert crit.locate_coarse_peak(h, f, "transition") == 4
    with pytest.raises(InvalidArgumentsError):
        crit.locate_coarse_peak(h, f, "median")


def test_two_level_peak_at_boundary():
    with pytest.raises(PeakAtBoundaryError) as info:
        crit.find_peak(1.0, 2, 1, (1e-3, 1.0), per_decade=5)
    assert info.value.h == pytest.approx(1e-3)


def test_peak_dominates_bracket_and_refines():
    pk = crit.find_peak(0.0, 10, 5, (1e-2, 1.0), per_decade=10)
    assert pk.grid_resolution <= 1e-4
    a, b = pk.bracket
    for h in (a, b):
        assert crit.compute_record(0.0, 10, 5, h, with_cfi=False).qfi <= pk.qfi_max
    fine = crit.find_peak(0.0, 10, 5, (1e-2, 1.0), per_decade=20)
    assert abs(fine.h_max / pk.h_max - 1) < 1e-3


# -- power-law fits ----------------------------------------------------------------


@given(st.floats(0.5, 6.0), st.floats(0.01, 100.0))
@settings(max_examples=30, deadline=None)
def test_fits_recover_generator(exponent, amp):
    sizes = [8, 10, 12, 14, 16]
    b = crit.fit_beta(sizes, [amp * L**exponent for L in sizes])
    assert b.exponent == pytest.approx(exponent, abs=1e-9)
    assert b.amplitude == pytest.approx(amp, rel=1e-9)
    assert 0 <= b.stderr < 1e-6 and b.r_squared <= 1
    z = crit.fit_z(sizes, [amp * L**-exponent for L in sizes], "extended")
    assert z.exponent == pytest.approx(exponent, abs=1e-9)


def test_fit_beta_needs_four_sizes():
    with pytest.raises(InsufficientDataError):
        crit.fit_beta([8, 10, 12], [1.0, 2.0, 3.0])
    with pytest.raises(InvalidArgumentsError):
        crit.fit_z([8, 10, 12, 14], [1, 1, 1, 1], "critical")


def test_fit_alpha_exact_power_law():
    hs = crit.log_grid(1e-2, 1.0, 10)
    recs = [record(L, h, abs(h - 1e-3) ** -4) for L in (12, 14, 16) for h in hs]
    fit = crit.fit_alpha(recs, 1e-3)
    assert fit.exponent == pytest.approx(4.0, abs=1e-6)
    assert fit.n_points == len(hs)


def test_fit_alpha_window_is_size_independent_run():
    hs = crit.log_grid(1e-2, 1.0, 10)
    recs = [record(L, h, h**-4 * (1 + (L / 20 if h < 0.1 else 0))) for L in (12, 14, 16) for h in hs]
    fit = crit.fit_alpha(recs, 0.0)
    assert fit.window[0] >= 0.1 and fit.window[1] == 1.0
    bad = [record(L, h, h**-4 * L) for L in (12, 14, 16) for h in hs]
    with pytest.raises(InsufficientDataError):
        crit.fit_alpha(bad, 0.0)


def test_invalid_records_excluded():
    hs = crit.log_grid(1e-2, 1.0, 10)
    recs = [record(16, h, h**-3) for h in hs] + [record(16, 2.0, 1e9, valid=False)]
    assert crit.fit_alpha(recs, 0.0, h_window=(None, 10.0)).exponent == pytest.approx(3.0)


# -- collapse ----------------------------------------------------------------------


def test_collapse_recovers_generator():
    hs = np.linspace(-2, 2, 41)
    recs = scaling_records((8, 12, 16, 24), hs, 0.0, 4.0, 1.0)
    res = crit.collapse(recs, init=(0.05, 3.6, 1.15), h_scale=0.05)
    assert abs(res.h_c) < 0.02
    assert res.alpha == pytest.approx(4.0, rel=0.02)
    assert res.nu == pytest.approx(1.0, rel=0.02)
    assert res.quality <= min(q for q, _, _ in res.restarts)
    assert res.alpha_over_nu == pytest.approx(4.0, rel=0.03)


def test_collapse_quality_prefers_true_triple():
    hs = np.linspace(-1, 3, 161)
    data = crit.CollapseData.from_records(scaling_records((8, 12, 16), hs, 0.5, 4.94, 1.39))
    best = crit.collapse_quality(data, 0.5, 4.94, 1.39)
    assert best < 0.1
    for da, dn in ((0.5, 0), (-0.5, 0), (0, 0.2), (0, -0.2)):
        assert crit.collapse_quality(data, 0.5, 4.94 + da, 1.39 + dn) > best


def test_collapse_preconditions():
    hs = np.linspace(-1, 1, 20)
    with pytest.raises(InsufficientDataError):
        crit.collapse(scaling_records((8, 12), hs, 0, 4, 1))
    with pytest.raises(InsufficientDataError):
        crit.collapse(scaling_records((8, 12, 16), hs[:10], 0, 4, 1))


def test_collapse_disjoint_windows_degenerate():
    recs = []
    for k, L in enumerate((8, 12, 16)):
        for h in np.linspace(10 * k, 10 * k + 1, 16):
            recs.append(record(L, h, 1.0 + h))
    data = crit.CollapseData.from_records(recs)
    q, counts = data.quality(0.0, 0.0, 1.0)
    assert math.isinf(q) and min(counts) < 3
    with pytest.raises(DegenerateCollapseError):
        crit.collapse(data, init=(0.0, 0.0, 0.1), restarts=2, maxiter=50)


# -- relations ---------------------------------------------------------------------


@pytest.mark.parametrize(
    "alpha,nu,beta,dev,ok",
    [(4.00, 1.01, 4.20, 0.24, True), (4.94, 1.39, 3.60, 0.05, True), (4, 1, 4, 0.0, True), (4, 1, 3, 1.0, False)],
)
def test_scaling_relation(alpha, nu, beta, dev, ok):
    rep = crit.check_scaling_relation(alpha, nu, beta)
    assert rep.deviation == pytest.approx(dev, abs=6e-3)
    assert rep.passed is ok


def test_normalized_exponent():
    assert crit.normalized_qfi_exponent(4.20, 1.04)[0] == pytest.approx(3.16)
    assert crit.normalized_qfi_exponent(3.3, 0.0) == (3.3, 0.0)
    b = crit.FitResult(4.0, 1.0, 0.03, 0.99, (8, 16), 5)
    z = crit.FitResult(1.0, 1.0, 0.04, 0.99, (8, 16), 5)
    v, se = crit.normalized_qfi_exponent(b, z)
    assert v == 3.0 and se == pytest.approx(0.05)

"""Peak location, power-law exponents and finite-size scaling collapse."""
from __future__ import annotations

import math
import time
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .eigensolve import DEFAULT_SEED
from .errors import (
    DegenerateCollapseError,
    InsufficientDataError,
    InvalidArgumentsError,
    PeakAtBoundaryError,
)
from .hamiltonian import ProbeParams
from .metrology import QFI_TOL, qfi

INVPHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class SweepRecord:
    eta: float
    L: int
    N: int
    h: float
    qfi: float
    cfi: float
    gap: float
    energy0: float
    delta_h: float
    richardson_err: float
    residual: float
    valid: bool
    wall_time: float = math.nan


def compute_record(
    eta: float,
    L: int,
    N: int,
    h: float,
    *,
    J: float = 1.0,
    tol: float = QFI_TOL,
    seed: int = DEFAULT_SEED,
    with_cfi: bool = True,
    timed: bool = False,
) -> SweepRecord:
    t0 = time.perf_counter()
    fp = qfi(ProbeParams(L, N, eta, J, h), with_cfi=with_cfi, tol=tol, seed=seed)
    elapsed = time.perf_counter() - t0 if timed else math.nan
    return SweepRecord(
        eta=fp.params.eta,
        L=L,
        N=N,
        h=float(h),
        qfi=fp.qfi,
        cfi=math.nan if fp.cfi is None else fp.cfi,
        gap=fp.gap,
        energy0=fp.energy0,
        delta_h=fp.delta_h,
        richardson_err=fp.richardson_err,
        residual=fp.residual,
        valid=fp.valid,
        wall_time=elapsed,
    )


def log_grid(start: float, stop: float, per_decade: int) -> np.ndarray:
    """``per_decade`` points per decade from ``start`` to ``stop`` inclusive."""
    if not (0 < start < stop):
        raise InvalidArgumentsError(f"need 0 < start < stop, got {start}, {stop}")
    lo, hi = math.log10(start), math.log10(stop)
    n = max(int(round((hi - lo) * per_decade)), 1)
    return np.array([10.0 ** (lo + (hi - lo) * k / n) for k in range(n + 1)])


def densify_grid(grid: np.ndarray, centre: float, per_decade: int, factor: int) -> np.ndarray:
    """Add points at ``factor`` times the density within one decade around ``centre``."""
    if factor <= 1:
        return np.asarray(grid, dtype=float)
    step = 1.0 / (per_decade * factor)
    c = math.log10(centre)
    extra = [10.0 ** (c + k * step) for k in range(-int(0.5 / step), int(0.5 / step) + 1)]
    grid = np.asarray(grid, dtype=float)
    coarse = np.log10(grid)
    # coarse points win over near-coincident fine ones so rows stay keyed by the coarse h
    extra = [x for x in extra if grid[0] < x < grid[-1] and np.min(np.abs(coarse - math.log10(x))) > 1e-9]
    return np.unique(np.concatenate([grid, extra]))


# -- peak search ---------------------------------------------------------------


@dataclass(frozen=True)
class PeakResult:
    h_max: float
    qfi_max: float
    bracket: tuple[float, float]
    grid_resolution: float
    mode: str
    evaluations: int
    scan_h: np.ndarray = field(repr=False, default=None)
    scan_qfi: np.ndarray = field(repr=False, default=None)


def transition_peak_index(values) -> int | None:
    """Index of the last prominent interior local maximum, or None.

    Prominence is measured against the lowest value between the candidate and
    the nearest point on its left that is at least as high; a rise of less
    than 1e-4 relative is treated as noise on a plateau.
    """
    f = np.where(np.isfinite(values), values, -np.inf)
    for i in range(len(f) - 2, 0, -1):
        if not (f[i] > f[i - 1] and f[i] >= f[i + 1]):
            continue
        higher = np.nonzero(f[:i] >= f[i])[0]
        j = higher[-1] if len(higher) else 0
        valley = f[j:i].min()
        if f[i] > valley * (1 + 1e-4):
            return i
    return None


def locate_coarse_peak(h, values, mode: str = "transition") -> int:
    f = np.where(np.isfinite(values), values, -np.inf)
    if mode == "global":
        i = int(np.argmax(f))
        if i in (0, len(f) - 1):
            raise PeakAtBoundaryError(f"maximum at range edge h={h[i]:g}", h=float(h[i]), qfi=float(f[i]))
        return i
    if mode == "transition":
        i = transition_peak_index(f)
        if i is None:
            j = int(np.argmax(f))
            raise PeakAtBoundaryError(
                f"no interior QFI maximum; largest value at h={h[j]:g}", h=float(h[j]), qfi=float(f[j])
            )
        return i
    raise InvalidArgumentsError(f"unknown peak mode {mode!r}")


def golden_maximize(func, lo: float, hi: float, rel_width: float, known: dict | None = None):
    """Golden-section maximisation of ``func`` over log(h) in [lo, hi].

    Returns (h_best, f_best, (lo, hi), evaluations).
    """
    cache = {math.log(h): v for h, v in (known or {}).items()}
    count = [0]

    def f(x):
        if x not in cache:
            cache[x] = func(math.exp(x))
            count[0] += 1
        return cache[x]

    a, b = math.log(lo), math.log(hi)
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while (math.exp(b) - math.exp(a)) / math.exp(0.5 * (a + b)) > rel_width:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)
    candidates = [(f(x), math.exp(x)) for x in (a, c, d, b)]
    fbest, hbest = max(candidates)
    return hbest, fbest, (math.exp(a), math.exp(b)), count[0]


def find_peak(
    eta: float,
    L: int,
    N: int,
    h_range: tuple[float, float] = (1e-5, 1.0),
    *,
    per_decade: int = 25,
    rel_width: float = 1e-4,
    mode: str = "transition",
    J: float = 1.0,
    tol: float = QFI_TOL,
    seed: int = DEFAULT_SEED,
    scan: tuple | None = None,
) -> PeakResult:
    """Locate h_max: log-spaced scan, then golden-section refinement.

    ``mode="transition"`` takes the last prominent local maximum of the scan,
    the bump where the QFI turns over into its localized-phase decay;
    ``mode="global"`` takes the largest scanned value. Either raises
    :class:`PeakAtBoundaryError` when no interior maximum exists. A
    precomputed ``scan=(h, qfi)`` skips the coarse pass.
    """

    def value(h):
        fp = qfi(ProbeParams(L, N, eta, J, h), tol=tol, seed=seed)
        return fp.qfi if fp.valid else -math.inf

    if scan is None:
        hs = log_grid(h_range[0], h_range[1], per_decade)
        fs = np.array([value(h) for h in hs])
    else:
        hs, fs = (np.asarray(a, dtype=float) for a in scan)
    i = locate_coarse_peak(hs, fs, mode)
    known = {float(hs[i - 1]): fs[i - 1], float(hs[i]): fs[i], float(hs[i + 1]): fs[i + 1]}
    h_best, f_best, bracket, evals = golden_maximize(value, hs[i - 1], hs[i + 1], rel_width, known)
    if fs[i] > f_best:
        h_best, f_best = float(hs[i]), float(fs[i])
    width = (bracket[1] - bracket[0]) / h_best
    return PeakResult(
        float(h_best), float(f_best), bracket, width, mode,
        (len(hs) if scan is None else 0) + evals, hs, fs,
    )


# -- power-law fits ------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    exponent: float
    amplitude: float
    stderr: float
    r_squared: float
    window: tuple[float, float]
    n_points: int
    label: str = ""


def loglog_fit(x, y):
    """Least-squares line through (log x, log y): slope, intercept, stderr, r^2."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    res = stats.linregress(lx, ly)
    r2 = min(float(res.rvalue) ** 2, 1.0)
    stderr = float(res.stderr) if np.isfinite(res.stderr) else 0.0
    return float(res.slope), float(res.intercept), abs(stderr), r2


def _power_fit(x, y, sign: float, label: str, min_points: int, what: str) -> FitResult:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    x, y = x[ok], y[ok]
    if len(x) < min_points:
        raise InsufficientDataError(f"{label} fit needs >= {min_points} {what}, got {len(x)}")
    slope, icpt, se, r2 = loglog_fit(x, y)
    return FitResult(sign * slope, math.exp(icpt), se, r2, (float(x.min()), float(x.max())), len(x), label)


def fit_beta(sizes, values, *, min_sizes: int = 4) -> FitResult:
    """F_Q ~ L^beta."""
    return _power_fit(sizes, values, +1.0, "beta", min_sizes, "sizes")


def fit_z(sizes, gaps, phase: str = "transition", *, min_sizes: int = 4) -> FitResult:
    """Gap ~ L^-z; ``phase`` is a label (extended, transition, localized)."""
    if phase not in ("extended", "transition", "localized"):
        raise InvalidArgumentsError(f"unknown phase {phase!r}")
    return _power_fit(sizes, gaps, -1.0, f"z[{phase}]", min_sizes, "sizes")


def _by_size(records):
    groups = defaultdict(dict)
    for r in records:
        if r.valid and np.isfinite(r.qfi):
            groups[r.L][r.h] = r.qfi
    return dict(sorted(groups.items()))


def size_independence(records, h_values, rel_tol: float = 0.03):
    """Worst relative disagreement between successive sizes at each h."""
    groups = _by_size(records)
    sizes = list(groups)
    out = []
    for h in h_values:
        vals = [groups[L].get(h) for L in sizes]
        if any(v is None for v in vals) or len(vals) < 2:
            out.append(math.nan)
            continue
        out.append(max(abs(b / a - 1) for a, b in zip(vals, vals[1:])))
    return np.array(out)


def fit_alpha(
    records,
    h_ref: float,
    *,
    h_window: tuple[float | None, float] = (None, 1.0),
    rel_tol: float = 0.03,
    min_points: int = 6,
) -> FitResult:
    """F_Q ~ |h - h_ref|^-alpha on the localized side.

    The window is the longest run of grid points, ending at the top of
    ``h_window``, on which successive sizes agree within ``rel_tol``; the fit
    uses the largest size on that run.
    """
    groups = _by_size(records)
    if not groups:
        raise InsufficientDataError("no valid records")
    lo, hi = h_window
    common = set.intersection(*(set(g) for g in groups.values()))
    hs = sorted(h for h in common if h > h_ref and h <= hi and (lo is None or h >= lo))
    if len(groups) >= 2:
        spread = size_independence(records, hs, rel_tol)
        run = []
        for h, s in zip(reversed(hs), reversed(spread)):
            if not s <= rel_tol:
                break
            run.append(h)
        hs = sorted(run)
    if len(hs) < min_points:
        raise InsufficientDataError(
            f"size-independent window has {len(hs)} points, need {min_points}"
        )
    largest = groups[max(groups)]
    x = np.array([h - h_ref for h in hs])
    y = np.array([largest[h] for h in hs])
    res = _power_fit(x, y, -1.0, "alpha", min_points, "points")
    return FitResult(res.exponent, res.amplitude, res.stderr, res.r_squared, (hs[0], hs[-1]), res.n_points, "alpha")


# -- finite-size scaling collapse --------------------------------------------------


@dataclass(frozen=True)
class CollapseResult:
    h_c: float
    alpha: float
    nu: float
    quality: float
    iterations: int
    uncertainty: dict
    restarts: tuple = field(repr=False, default=())

    @property
    def alpha_over_nu(self) -> float:
        return self.alpha / self.nu


class CollapseData:
    """(L, h, F) triples grouped by size, ready for repeated quality evaluations."""

    def __init__(self, L, h, F, rel_err: float = 0.01):
        L = np.asarray(L)
        h = np.asarray(h, dtype=float)
        F = np.asarray(F, dtype=float)
        ok = np.isfinite(F) & (F > 0)
        self.sizes = sorted(set(L[ok].tolist()))
        self.rel_err = rel_err
        self.groups = []
        for size in self.sizes:
            sel = ok & (L == size)
            order = np.argsort(h[sel])
            self.groups.append((float(size), h[sel][order], F[sel][order]))

    @classmethod
    def from_records(cls, records, rel_err: float = 0.01):
        recs = [r for r in records if r.valid]
        return cls([r.L for r in recs], [r.h for r in recs], [r.qfi for r in recs], rel_err)

    def scaled(self, h_c, alpha, nu):
        out = []
        for L, h, F in self.groups:
            x = L ** (1.0 / nu) * (h - h_c)
            y = L ** (-alpha / nu) * F
            out.append((x, y))
        return out

    def quality(self, h_c, alpha, nu, min_overlap: int = 3):
        """Houdayer-Hartmann style master-curve mismatch.

        Each point is compared with the piecewise-linear interpolation of every
        other size's rescaled curve at the same x (where that curve covers it).
        The interpolants are combined by inverse variance, and the squared
        deviation is normalized by the combined variance, with each point
        carrying a relative error ``rel_err``. Returns (quality, overlap counts).
        """
        curves = self.scaled(h_c, alpha, nu)
        total = 0.0
        npts = 0
        counts = []
        for i, (xi, yi) in enumerate(curves):
            wsum = np.zeros(len(xi))
            ysum = np.zeros(len(xi))
            for j, (xj, yj) in enumerate(curves):
                if i == j or len(xj) < 2:
                    continue
                inside = (xi >= xj[0]) & (xi <= xj[-1])
                if not inside.any():
                    continue
                k = np.clip(np.searchsorted(xj, xi[inside]) - 1, 0, len(xj) - 2)
                x0, x1 = xj[k], xj[k + 1]
                t = np.where(x1 > x0, (xi[inside] - x0) / np.where(x1 > x0, x1 - x0, 1.0), 0.0)
                Y = (1 - t) * yj[k] + t * yj[k + 1]
                dY2 = ((1 - t) * self.rel_err * yj[k]) ** 2 + (t * self.rel_err * yj[k + 1]) ** 2
                w = 1.0 / dY2
                wsum[inside] += w
                ysum[inside] += w * Y
            covered = wsum > 0
            counts.append(int(covered.sum()))
            if covered.any():
                ybar = ysum[covered] / wsum[covered]
                var = (self.rel_err * yi[covered]) ** 2 + 1.0 / wsum[covered]
                total += float(np.sum((yi[covered] - ybar) ** 2 / var))
                npts += int(covered.sum())
        if npts == 0:
            return math.inf, counts
        q = total / npts
        if min(counts) < min_overlap:
            return math.inf, counts
        return q, counts


def collapse_quality(data, h_c: float, alpha: float, nu: float) -> float:
    if not isinstance(data, CollapseData):
        data = CollapseData.from_records(data)
    return data.quality(h_c, alpha, nu)[0]


def collapse(
    data,
    init: tuple[float, float, float] = (1e-5, 4.0, 1.0),
    *,
    restarts: int = 8,
    seed: int = 7,
    h_scale: float | None = None,
    rel_err: float = 0.01,
    maxiter: int = 2000,
) -> CollapseResult:
    """Fit (h_c, alpha, nu) so that L^(-alpha/nu) F collapses onto one curve
    in x = L^(1/nu) (h - h_c).

    Nelder-Mead from ``init`` and from ``restarts - 1`` points drawn around it
    with a fixed seed; the best final point wins and the spread of the
    restarts that reached a comparable quality (within 2x of the best) is the
    reported uncertainty.
    """
    if not isinstance(data, CollapseData):
        data = CollapseData.from_records(data, rel_err)
    if len(data.sizes) < 3:
        raise InsufficientDataError(f"collapse needs >= 3 sizes, got {len(data.sizes)}")
    for L, h, _ in data.groups:
        if len(h) < 15:
            raise InsufficientDataError(f"size L={L:g} has {len(h)} points, need >= 15")
    if h_scale is None:
        h_scale = 0.1 * float(np.median(np.abs(np.concatenate([g[1] for g in data.groups]))))
    h_scale = max(h_scale, 1e-12)
    init = np.array(init, dtype=float)

    def objective(p):
        hc, a, nu = p
        if nu <= 0.05 or nu > 20:
            return 1e30
        q = data.quality(hc, a, nu)[0]
        return q if np.isfinite(q) else 1e30

    rng = np.random.default_rng(seed)
    scale = np.array([h_scale, 0.1 * max(abs(init[1]), 1.0), 0.1 * max(abs(init[2]), 0.1)])
    starts = [init] + [init + scale * rng.standard_normal(3) for _ in range(max(restarts, 1) - 1)]
    runs = []
    for x0 in starts:
        x0 = x0.copy()
        x0[2] = max(x0[2], 0.1)
        simplex = np.vstack([x0] + [x0 + np.eye(3)[k] * scale[k] * 2 for k in range(3)])
        res = optimize.minimize(
            objective, x0, method="Nelder-Mead",
            options={"initial_simplex": simplex, "xatol": 1e-7, "fatol": 1e-10, "maxiter": maxiter},
        )
        runs.append((float(res.fun), tuple(float(v) for v in res.x), int(res.nit)))
    runs.sort(key=lambda r: r[0])
    best_q, best_x, best_it = runs[0]
    if best_q >= 1e30:
        raise DegenerateCollapseError("no parameter set gives >= 3 overlapping points for every size")
    _, counts = data.quality(*best_x)
    if min(counts) < 3:
        raise DegenerateCollapseError(f"overlap counts {counts} below 3 at the optimum")
    close = np.array([r[1] for r in runs if r[0] <= 2 * best_q + 1e-300])
    spread = close.std(axis=0) if len(close) > 1 else np.zeros(3)
    return CollapseResult(
        h_c=best_x[0],
        alpha=best_x[1],
        nu=best_x[2],
        quality=best_q,
        iterations=best_it,
        uncertainty={"h_c": float(spread[0]), "alpha": float(spread[1]), "nu": float(spread[2])},
        restarts=tuple(runs),
    )


# -- relations between exponents --------------------------------------------------


@dataclass(frozen=True)
class ScalingReport:
    alpha_over_nu: float
    beta: float
    deviation: float
    tolerance: float
    passed: bool


def check_scaling_relation(alpha: float, nu: float, beta: float, tolerance: float = 0.35) -> ScalingReport:
    """Compare alpha/nu with beta."""
    ratio = alpha / nu
    dev = abs(ratio - beta)
    return ScalingReport(ratio, beta, dev, tolerance, bool(dev <= tolerance))


def normalized_qfi_exponent(beta, z) -> tuple[float, float]:
    """Exponent of F_Q / t ~ L^(beta - z) and its propagated standard error."""
    b, sb = (beta.exponent, beta.stderr) if isinstance(beta, FitResult) else (float(beta), 0.0)
    zz, sz = (z.exponent, z.stderr) if isinstance(z, FitResult) else (float(z), 0.0)
    return b - zz, math.hypot(sb, sz)

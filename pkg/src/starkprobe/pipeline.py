"""Experiment configuration, deterministic parallel sweeps and the analysis
pipeline (peaks, exponent fits, collapse, report and plots)."""
from __future__ import annotations

import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from . import criticality as crit
from ._backend import BACKEND
from .eigensolve import DEFAULT_SEED
from .eigensolve import gap as solve_gap
from .errors import ConfigError, InsufficientDataError, InvalidArgumentsError, StarkProbeError
from .hamiltonian import ProbeParams, build_operator, format_eta, parse_eta
from .metrology import QFI_TOL, qfi
from .svgplot import line_plot

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "eta", "L", "N", "h", "qfi", "cfi", "gap", "energy0",
    "delta_h", "richardson_err", "residual", "valid", "wall_time",
)

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_FAILED = 0, 1, 2, 3


# -- configuration ----------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    eta_list: tuple = (0.0,)
    size_list: tuple = (8, 10, 12)
    filling: Fraction = Fraction(1, 2)
    h_start: float = 1e-5
    h_stop: float = 1.0
    per_decade: int = 25
    densify: int = 1
    tol: float = QFI_TOL
    delta_h: str = "adaptive"
    workers: int = 1
    out: str = "out"
    seed: int = DEFAULT_SEED
    cfi: bool = True
    timings: bool = False
    J: float = 1.0
    h_extended: float = 1e-4
    h_localized: float = 1.0
    peak_mode: str = "transition"
    collapse_sizes: tuple = ()
    collapse_init: tuple = (1e-5, 4.0, 1.0)
    alpha_sizes: int = 3
    alpha_ref: str = "zero"
    format: str = "csv"

    def __post_init__(self):
        if not self.eta_list:
            raise ConfigError("eta list is empty")
        if not self.size_list:
            raise ConfigError("size list is empty")
        for L in self.size_list:
            n = self.filling * L
            if n.denominator != 1:
                raise ConfigError(f"filling {self.filling} times L={L} is {n}, not an integer")
            if not 2 <= L <= 32 or not 0 <= n <= L:
                raise ConfigError(f"unsupported size L={L} at filling {self.filling}")
        if not 0 < self.h_start < self.h_stop:
            raise ConfigError(f"h grid needs 0 < start < stop, got {self.h_start}, {self.h_stop}")
        if self.per_decade < 1 or self.densify < 1:
            raise ConfigError("per_decade and densify must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.delta_h != "adaptive":
            try:
                if not float(self.delta_h) > 0:
                    raise ValueError
            except ValueError:
                raise ConfigError(f"delta_h must be 'adaptive' or a positive number, got {self.delta_h!r}") from None
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        if self.alpha_ref not in ("zero", "h_max"):
            try:
                float(self.alpha_ref)
            except ValueError:
                raise ConfigError(f"alpha_ref must be zero, h_max or a number, got {self.alpha_ref!r}") from None
        if self.peak_mode not in ("transition", "global"):
            raise ConfigError(f"peak_mode must be transition or global, got {self.peak_mode!r}")

    def excitations(self, L: int) -> int:
        return int(self.filling * L)

    def h_grid(self) -> np.ndarray:
        return crit.log_grid(self.h_start, self.h_stop, self.per_decade)

    def initial_step(self):
        return None if self.delta_h == "adaptive" else float(self.delta_h)

    def resolved(self) -> dict:
        d = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "eta_list":
                v = [format_eta(e) for e in v]
            elif f.name == "filling":
                v = str(v)
            elif isinstance(v, tuple):
                v = list(v)
            d[f.name] = v
        return d


def _split(text: str) -> list[str]:
    return [t for t in (s.strip() for s in text.replace(";", ",").split(",")) if t]


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_h_grid(text: str) -> dict:
    """``start:stop:per_decade[:densify]``."""
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise ConfigError(f"h grid must be start:stop:per_decade[:densify], got {text!r}")
    try:
        out = {"h_start": float(parts[0]), "h_stop": float(parts[1]), "per_decade": int(parts[2])}
        if len(parts) == 4:
            out["densify"] = int(parts[3])
    except ValueError as exc:
        raise ConfigError(f"bad h grid {text!r}: {exc}") from None
    return out


_CONVERTERS = {
    "eta": ("eta_list", lambda s: tuple(parse_eta(t) for t in _split(s))),
    "eta_list": ("eta_list", lambda s: tuple(parse_eta(t) for t in _split(s))),
    "sizes": ("size_list", lambda s: tuple(int(t) for t in _split(s))),
    "size_list": ("size_list", lambda s: tuple(int(t) for t in _split(s))),
    "filling": ("filling", lambda s: Fraction(s.strip())),
    "h_start": ("h_start", float),
    "h_stop": ("h_stop", float),
    "per_decade": ("per_decade", int),
    "densify": ("densify", int),
    "tol": ("tol", float),
    "delta_h": ("delta_h", lambda s: s.strip()),
    "workers": ("workers", int),
    "out": ("out", lambda s: s.strip()),
    "seed": ("seed", int),
    "cfi": ("cfi", _bool),
    "timings": ("timings", _bool),
    "J": ("J", float),
    "h_extended": ("h_extended", float),
    "h_localized": ("h_localized", float),
    "peak_mode": ("peak_mode", lambda s: s.strip()),
    "collapse_sizes": ("collapse_sizes", lambda s: tuple(int(t) for t in _split(s))),
    "collapse_init": ("collapse_init", lambda s: tuple(float(t) for t in _split(s))),
    "alpha_sizes": ("alpha_sizes", int),
    "alpha_ref": ("alpha_ref", lambda s: s.strip()),
    "format": ("format", lambda s: s.strip()),
}


def config_from_mapping(values: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    kwargs = {}
    for key, raw in values.items():
        if raw is None:
            continue
        if key == "h_grid":
            kwargs.update(parse_h_grid(raw))
            continue
        if key not in _CONVERTERS:
            raise ConfigError(f"unknown config key {key!r}")
        name, conv = _CONVERTERS[key]
        try:
            kwargs[name] = conv(raw) if isinstance(raw, str) else raw
        except (ValueError, ZeroDivisionError, InvalidArgumentsError) as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
    try:
        return replace(base, **kwargs) if base is not None else ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


# -- CSV ---------------------------------------------------------------------------


def _num(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def format_record(r: crit.SweepRecord) -> str:
    vals = []
    for name in CSV_COLUMNS:
        v = getattr(r, name)
        vals.append(format_eta(v) if name == "eta" else _num(v))
    return ",".join(vals)


def write_csv(records, path) -> None:
    lines = [",".join(CSV_COLUMNS)] + [format_record(r) for r in sort_records(records)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path) -> list[crit.SweepRecord]:
    text = Path(path).read_text().splitlines()
    if not text or tuple(text[0].split(",")) != CSV_COLUMNS:
        raise ConfigError(f"{path}: unexpected CSV header")
    out = []
    for line in text[1:]:
        if not line.strip():
            continue
        cells = dict(zip(CSV_COLUMNS, line.split(",")))
        out.append(
            crit.SweepRecord(
                eta=parse_eta(cells["eta"]),
                L=int(cells["L"]),
                N=int(cells["N"]),
                valid=cells["valid"] == "true",
                **{k: float(cells[k]) for k in CSV_COLUMNS if k not in ("eta", "L", "N", "valid")},
            )
        )
    return out


def records_to_json(records) -> list[dict]:
    out = []
    for r in sort_records(records):
        d = asdict(r)
        d["eta"] = format_eta(r.eta)
        out.append({k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()})
    return out


def sort_records(records):
    return sorted(records, key=lambda r: (r.eta, r.L, r.h))


# -- sweep -------------------------------------------------------------------------


def _limit_threads():
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        return None
    return threadpool_limits(1)


def _compute_chunk(points, settings):
    _limit_threads()
    out = []
    for eta, L, N, h in points:
        out.append(_compute_point(eta, L, N, h, settings))
    return out


def _compute_point(eta, L, N, h, settings):
    t0 = time.perf_counter()
    fp = qfi(
        ProbeParams(L, N, eta, settings["J"], h),
        with_cfi=settings["cfi"],
        tol=settings["tol"],
        seed=settings["seed"],
        delta_h=settings["delta_h"],
    )
    elapsed = time.perf_counter() - t0 if settings["timings"] else math.nan
    return crit.SweepRecord(
        eta=eta, L=L, N=N, h=float(h),
        qfi=fp.qfi,
        cfi=math.nan if fp.cfi is None else fp.cfi,
        gap=fp.gap, energy0=fp.energy0, delta_h=fp.delta_h,
        richardson_err=fp.richardson_err, residual=fp.residual,
        valid=fp.valid, wall_time=elapsed,
    )


def compute_points(points, config: ExperimentConfig) -> list[crit.SweepRecord]:
    """Evaluate (eta, L, N, h) points, statically partitioned over workers.

    Every worker (including the single-worker case) runs with one BLAS thread
    so that results do not depend on the worker count.
    """
    settings = {
        "J": config.J, "cfi": config.cfi, "tol": config.tol, "seed": config.seed,
        "delta_h": config.initial_step(), "timings": config.timings,
    }
    points = list(points)
    if not points:
        return []
    if config.workers == 1 or len(points) == 1:
        limiter = _limit_threads()
        try:
            return [_compute_point(*p, settings) for p in points]
        finally:
            if limiter is not None:
                limiter.restore_original_limits()
    chunks = [points[i:: config.workers] for i in range(config.workers)]
    chunks = [c for c in chunks if c]
    with ProcessPoolExecutor(max_workers=len(chunks), mp_context=get_context("spawn")) as pool:
        results = list(pool.map(_compute_chunk, chunks, [settings] * len(chunks)))
    return [r for chunk in results for r in chunk]


def _meta(config: ExperimentConfig) -> dict:
    return {
        "filling": str(config.filling), "seed": config.seed, "tol": config.tol,
        "delta_h": config.delta_h, "J": config.J, "cfi": config.cfi,
    }


def _load_existing(out_dir: Path, config: ExperimentConfig) -> dict:
    csv_path, meta_path = out_dir / "sweep.csv", out_dir / "sweep_meta.json"
    if not (csv_path.exists() and meta_path.exists()):
        return {}
    try:
        if json.loads(meta_path.read_text()) != _meta(config):
            return {}
        return {(r.eta, r.L, r.N, r.h): r for r in read_csv(csv_path)}
    except (ConfigError, ValueError, KeyError):
        return {}


@dataclass
class SweepOutcome:
    records: list
    failures: int
    computed: int
    path: Path | None = None

    @property
    def exit_code(self) -> int:
        if not self.records or self.failures == len(self.records):
            return EXIT_FAILED
        return EXIT_PARTIAL if self.failures else EXIT_OK


def run_sweep(config: ExperimentConfig, *, write: bool = True) -> SweepOutcome:
    """One record per (eta, L, h); rows sorted by (eta, L, h).

    With ``densify > 1`` a second pass adds points within one decade of each
    coarse transition peak. Rows already present in ``out/sweep.csv`` from a
    run with the same (filling, seed, tol, step policy) are reused.
    """
    out_dir = Path(config.out)
    existing = _load_existing(out_dir, config) if write else {}
    grid = config.h_grid()
    have = dict(existing)
    computed = 0

    def run(points):
        nonlocal computed
        todo = [p for p in points if p not in have]
        for r in compute_points(todo, config):
            have[(r.eta, r.L, r.N, r.h)] = r
        computed += len(todo)

    coarse = [(eta, L, config.excitations(L), float(h)) for eta in config.eta_list for L in config.size_list for h in grid]
    run(coarse)
    wanted = set(coarse)
    if config.densify > 1:
        extra = []
        for eta in config.eta_list:
            for L in config.size_list:
                N = config.excitations(L)
                vals = np.array([have[(eta, L, N, float(h))].qfi for h in grid])
                i = crit.transition_peak_index(vals)
                if i is None:
                    continue
                fine = crit.densify_grid(grid, float(grid[i]), config.per_decade, config.densify)
                extra += [(eta, L, N, float(h)) for h in fine]
        run(extra)
        wanted.update(extra)
    records = sort_records(have[k] for k in wanted)
    failures = sum(not r.valid for r in records)
    path = None
    if write:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "sweep.csv"
        write_csv(records, path)
        (out_dir / "sweep_meta.json").write_text(json.dumps(_meta(config), sort_keys=True) + "\n")
        if config.format == "json":
            (out_dir / "sweep.json").write_text(json.dumps(records_to_json(records), indent=1) + "\n")
    return SweepOutcome(records, failures, computed, path)


# -- pipeline ----------------------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: NaN/inf become strings, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def _fit_dict(fit: crit.FitResult) -> dict:
    return {
        "exponent": fit.exponent, "stderr": fit.stderr, "amplitude": fit.amplitude,
        "r_squared": fit.r_squared, "window": list(fit.window), "n_points": fit.n_points,
    }


def _by_L(records):
    out = {}
    for r in records:
        out.setdefault(r.L, []).append(r)
    return {L: sorted(rs, key=lambda r: r.h) for L, rs in sorted(out.items())}


def analyze_eta(eta, records, config: ExperimentConfig, *, solve: bool = True) -> dict:
    """All fits for one eta. Individual failures are reported, not raised."""
    res: dict = {"eta": format_eta(eta), "errors": {}}
    groups = _by_L([r for r in records if r.eta == eta])
    if not groups:
        res["errors"]["data"] = "no records"
        return res
    seed, tol, J = config.seed, config.tol, config.J

    peaks = {}
    for L, rs in groups.items():
        hs = np.array([r.h for r in rs])
        fs = np.array([r.qfi if r.valid else math.nan for r in rs])
        try:
            if solve:
                pk = crit.find_peak(eta, L, rs[0].N, scan=(hs, fs), mode=config.peak_mode, J=J, tol=tol, seed=seed)
            else:
                i = crit.locate_coarse_peak(hs, fs, config.peak_mode)
                pk = crit.PeakResult(float(hs[i]), float(fs[i]), (float(hs[i - 1]), float(hs[i + 1])),
                                     float((hs[i + 1] - hs[i - 1]) / hs[i]), config.peak_mode, 0, hs, fs)
            peaks[L] = pk
        except StarkProbeError as exc:
            res["errors"][f"peak_L{L}"] = str(exc)
    res["h_max"] = {str(L): p.h_max for L, p in peaks.items()}
    res["qfi_max"] = {str(L): p.qfi_max for L, p in peaks.items()}

    fits = {}
    try:
        fits["beta_hmax"] = crit.fit_beta(list(peaks), [p.qfi_max for p in peaks.values()])
    except StarkProbeError as exc:
        res["errors"]["beta_hmax"] = str(exc)

    def value_at(L, h):
        for r in groups[L]:
            if r.h == h and r.valid:
                return r.qfi
        if not solve:
            return math.nan
        fp = qfi(ProbeParams(L, groups[L][0].N, eta, J, h), tol=tol, seed=seed)
        return fp.qfi if fp.valid else math.nan

    sizes = list(groups)
    try:
        fits["beta_extended"] = crit.fit_beta(sizes, [value_at(L, config.h_extended) for L in sizes])
    except StarkProbeError as exc:
        res["errors"]["beta_extended"] = str(exc)

    gaps = {}
    if solve:
        rules = {
            "extended": lambda L: config.h_extended,
            "transition": lambda L: peaks[L].h_max if L in peaks else None,
            "localized": lambda L: config.h_localized,
        }
        for phase, rule in rules.items():
            pts = []
            for L in sizes:
                h = rule(L)
                if h is None:
                    continue
                try:
                    pts.append((L, solve_gap(build_operator(ProbeParams(L, groups[L][0].N, eta, J, h)), seed=seed)))
                except StarkProbeError as exc:
                    res["errors"][f"gap_{phase}_L{L}"] = str(exc)
            gaps[phase] = pts
            try:
                fits[f"z_{phase}"] = crit.fit_z([p[0] for p in pts], [p[1] for p in pts], phase)
            except StarkProbeError as exc:
                res["errors"][f"z_{phase}"] = str(exc)
    res["gaps"] = {ph: {str(L): g for L, g in pts} for ph, pts in gaps.items()}

    csizes = [L for L in (config.collapse_sizes or sizes) if L in groups]
    coll = None
    try:
        coll = crit.collapse([r for L in csizes for r in groups[L]], init=config.collapse_init)
        res["collapse"] = {
            "sizes": csizes, "h_c": coll.h_c, "alpha": coll.alpha, "nu": coll.nu,
            "quality": coll.quality, "iterations": coll.iterations, "uncertainty": coll.uncertainty,
        }
    except StarkProbeError as exc:
        res["errors"]["collapse"] = str(exc)

    asizes = sizes[-config.alpha_sizes:] if config.alpha_sizes else sizes
    try:
        if config.alpha_ref == "zero":
            h_ref = 0.0
        elif config.alpha_ref == "h_max":
            if max(asizes) not in peaks:
                raise InsufficientDataError(f"no h_max for L={max(asizes)}")
            h_ref = peaks[max(asizes)].h_max
        else:
            h_ref = float(config.alpha_ref)
        res["alpha_h_ref"] = h_ref
        fits["alpha"] = crit.fit_alpha([r for L in asizes for r in groups[L]], h_ref, h_window=(None, config.h_stop))
    except StarkProbeError as exc:
        res["errors"]["alpha"] = str(exc)

    res["fits"] = {k: _fit_dict(v) for k, v in fits.items()}
    if coll is not None and "beta_hmax" in fits:
        rep = crit.check_scaling_relation(coll.alpha, coll.nu, fits["beta_hmax"].exponent)
        res["scaling_relation"] = asdict(rep)
    if "beta_hmax" in fits and "z_transition" in fits:
        v, se = crit.normalized_qfi_exponent(fits["beta_hmax"], fits["z_transition"])
        res["beta_minus_z"] = {"value": v, "stderr": se}
    res["_peaks"] = peaks
    res["_collapse"] = coll
    res["_gaps"] = gaps
    return res


def _plots(eta, res, records, out_dir: Path):
    tag = format_eta(eta)
    groups = _by_L([r for r in records if r.eta == eta and r.valid])
    files = {}
    series = [(f"L={L}", [r.h for r in rs], [r.qfi for r in rs]) for L, rs in groups.items()]
    files["qfi_vs_h"] = line_plot(series, title=f"QFI vs h (eta={tag})", xlabel="h/J", ylabel="F_Q",
                                  logx=True, logy=True, markers=False)
    peaks = res.get("_peaks", {})
    s2 = [("F_Q(h_max)", list(peaks), [p.qfi_max for p in peaks.values()])]
    files["qfi_vs_L"] = line_plot(s2, title=f"peak QFI vs L (eta={tag})", xlabel="L", ylabel="F_Q", logx=True, logy=True)
    coll = res.get("_collapse")
    if coll is not None:
        s3 = []
        for L, rs in groups.items():
            x = [L ** (1 / coll.nu) * (r.h - coll.h_c) for r in rs]
            y = [L ** (-coll.alpha / coll.nu) * r.qfi for r in rs]
            s3.append((f"L={L}", x, y))
        files["collapse"] = line_plot(s3, title=f"collapse (eta={tag})", xlabel="L^(1/nu) (h - h_c)",
                                      ylabel="L^(-alpha/nu) F_Q", logx=True, logy=True, markers=False)
    gaps = res.get("_gaps", {})
    if gaps:
        s4 = [(ph, [p[0] for p in pts], [p[1] for p in pts]) for ph, pts in gaps.items()]
        files["gap_vs_L"] = line_plot(s4, title=f"gap vs L (eta={tag})", xlabel="L", ylabel="gap", logx=True, logy=True)
    written = []
    for name, svg in files.items():
        path = out_dir / f"{name}_eta{tag}.svg"
        path.write_text(svg)
        written.append(path.name)
    return written


@dataclass
class PipelineOutcome:
    report: dict
    records: list
    sweep_failures: int
    eta_failures: int = 0
    paths: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        n = len(self.report.get("results", {}))
        if n and self.eta_failures == n:
            return EXIT_FAILED
        if self.eta_failures or self.sweep_failures:
            return EXIT_PARTIAL
        return EXIT_OK


def run_pipeline(config: ExperimentConfig, records=None, *, solve: bool = True, write: bool = True) -> PipelineOutcome:
    """Sweep (unless ``records`` are given), then per-eta analysis, JSON report
    and SVG plots. ``solve=False`` analyses the records alone (no eigensolves:
    peaks come from the grid, gap fits are skipped)."""
    failures = 0
    if records is None:
        sweep = run_sweep(config, write=write)
        records, failures = sweep.records, sweep.failures
    results = {}
    bad = 0
    out_dir = Path(config.out)
    paths = {}
    if write:
        out_dir.mkdir(parents=True, exist_ok=True)
    for eta in config.eta_list:
        res = analyze_eta(eta, records, config, solve=solve)
        if write:
            paths[format_eta(eta)] = _plots(eta, res, records, out_dir)
        if "fits" not in res or not res["fits"]:
            bad += 1
        results[format_eta(eta)] = {k: v for k, v in res.items() if not k.startswith("_")}
    report = _clean({"config": config.resolved(), "backend": BACKEND, "results": results})
    if write:
        (out_dir / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    return PipelineOutcome(report, records, failures, bad, paths)

"""Command-line entry point: ``starkprobe <subcommand> [flags]``.

Config files are flat ``key = value`` text (``#`` comments). Recognised keys:

    eta            comma list, ``inf`` allowed          (0)
    sizes          comma list of chain lengths          (8,10,12)
    filling        rational n, N = n L                  (1/2)
    h_grid         start:stop:per_decade[:densify]      (1e-5:1:25:1)
    tol            eigensolver residual tolerance       (1e-12)
    delta_h        ``adaptive`` or a fixed initial step
    workers        process count                        (1)
    seed           Lanczos start-vector seed            (20231)
    out            output directory                     (out)
    format         csv | json                           (csv)
    cfi            compute the computational-basis CFI  (true)
    timings        fill the wall_time column            (false)
    J, h_extended, h_localized, peak_mode, collapse_sizes, collapse_init,
    alpha_sizes, alpha_ref (zero | h_max | number: reference field of the alpha fit)

Command-line flags override file values.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import criticality as crit
from . import pipeline as pl
from .eigensolve import gap as solve_gap
from .errors import ConfigError, StarkProbeError
from .hamiltonian import ProbeParams, build_operator, format_eta

log = logging.getLogger("starkprobe")

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_FAILED = pl.EXIT_OK, pl.EXIT_CONFIG, pl.EXIT_PARTIAL, pl.EXIT_FAILED


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", metavar="PATH", help="flat key = value config file")
    p.add_argument("--eta", help="comma list of exponents (inf allowed)")
    p.add_argument("--sizes", help="comma list of chain lengths")
    p.add_argument("--filling", help="rational filling n, e.g. 1/2")
    p.add_argument("--h-grid", dest="h_grid", help="start:stop:per_decade[:densify]")
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="starkprobe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="QFI/CFI/gap over the (eta, L, h) grid")
    _common(p)

    p = sub.add_parser("peak", help="locate h_max for every (eta, L)")
    _common(p)
    p.add_argument("--input", help="reuse the scan from a sweep CSV")
    p.add_argument("--mode", choices=("transition", "global"))

    p = sub.add_parser("fit-alpha", help="alpha from the localized-side decay")
    _common(p)
    p.add_argument("--input", help="sweep CSV (computed if omitted)")
    p.add_argument("--h-ref", type=float, default=0.0)

    p = sub.add_parser("fit-beta", help="beta from F_Q ~ L^beta at h_max or a fixed h")
    _common(p)
    p.add_argument("--input", help="sweep CSV to take the peak scans from")
    p.add_argument("--at", type=float, help="fixed h instead of h_max")

    p = sub.add_parser("fit-z", help="z from gap ~ L^-z")
    _common(p)
    p.add_argument("--phase", choices=("extended", "transition", "localized"), default="transition")
    p.add_argument("--at", type=float, help="fixed h (default: phase rule)")
    p.add_argument("--input", help="sweep CSV (used for the transition-phase h_max)")

    p = sub.add_parser("collapse", help="finite-size scaling collapse fit")
    _common(p)
    p.add_argument("--input", help="sweep CSV (computed if omitted)")
    p.add_argument("--init", help="h_c,alpha,nu starting point")

    p = sub.add_parser("pipeline", help="sweep, fits, collapse, report and plots")
    _common(p)
    p.add_argument("--input", help="analyse an existing sweep CSV instead of sweeping")
    p.add_argument("--no-solve", action="store_true", help="analysis only, no eigensolves")

    p = sub.add_parser("oracle-check", help="compare against the dense Pauli-matrix reference")
    _common(p)
    p.add_argument("--max-l", type=int, default=8)
    return parser


def load_config(args) -> pl.ExperimentConfig:
    values = pl.read_config_file(args.config) if args.config else {}
    for key in ("eta", "sizes", "filling", "h_grid", "workers", "seed", "out", "format"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return pl.config_from_mapping(values)


def _emit(rows: list[dict], config: pl.ExperimentConfig, name: str):
    """Print rows to stdout and, when an output directory is set, save them."""
    if config.format == "json":
        text = json.dumps(pl._clean(rows), indent=1, sort_keys=True) + "\n"
    else:
        cols = list(rows[0]) if rows else []
        lines = [",".join(cols)]
        for r in rows:
            lines.append(",".join(_cell(r[c]) for c in cols))
        text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{name}.{config.format}").write_text(text)


def _cell(v):
    if isinstance(v, float):
        return pl._num(v)
    if isinstance(v, (list, tuple)):
        return ";".join(_cell(x) for x in v)
    return str(v)


def _records(args, config):
    if getattr(args, "input", None):
        recs = pl.read_csv(args.input)
        return [r for r in recs if r.eta in config.eta_list and r.L in config.size_list] or recs
    return pl.run_sweep(config).records


def _fit_row(eta, fit: crit.FitResult) -> dict:
    return {
        "eta": format_eta(eta), "label": fit.label, "exponent": fit.exponent, "stderr": fit.stderr,
        "r_squared": fit.r_squared, "window": list(fit.window), "n_points": fit.n_points,
    }


def _peaks(args, config, records=None):
    mode = getattr(args, "mode", None) or config.peak_mode
    out = {}
    for eta in config.eta_list:
        for L in config.size_list:
            scan = None
            if records is not None:
                rs = sorted((r for r in records if r.eta == eta and r.L == L), key=lambda r: r.h)
                if rs:
                    scan = (np.array([r.h for r in rs]), np.array([r.qfi if r.valid else math.nan for r in rs]))
            try:
                out[(eta, L)] = crit.find_peak(
                    eta, L, config.excitations(L), (config.h_start, config.h_stop),
                    per_decade=config.per_decade, mode=mode, J=config.J, tol=config.tol,
                    seed=config.seed, scan=scan,
                )
            except StarkProbeError as exc:
                log.warning("peak eta=%s L=%d: %s", format_eta(eta), L, exc)
                out[(eta, L)] = exc
    return out


def _status(total: int, failed: int) -> int:
    if total == 0 or failed == total:
        return EXIT_FAILED
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_sweep(args, config):
    res = pl.run_sweep(config)
    log.info("%d rows (%d computed, %d invalid) -> %s", len(res.records), res.computed, res.failures, res.path)
    return res.exit_code


def cmd_peak(args, config):
    records = pl.read_csv(args.input) if args.input else None
    peaks = _peaks(args, config, records)
    rows, bad = [], 0
    for (eta, L), p in peaks.items():
        if isinstance(p, Exception):
            bad += 1
            rows.append({"eta": format_eta(eta), "L": L, "h_max": math.nan, "qfi_max": math.nan,
                         "bracket_lo": math.nan, "bracket_hi": math.nan, "evaluations": 0})
            continue
        rows.append({"eta": format_eta(eta), "L": L, "h_max": p.h_max, "qfi_max": p.qfi_max,
                     "bracket_lo": p.bracket[0], "bracket_hi": p.bracket[1], "evaluations": p.evaluations})
    _emit(rows, config, "peaks")
    return _status(len(rows), bad)


def cmd_fit_beta(args, config):
    rows, bad = [], 0
    if args.at is not None:
        for eta in config.eta_list:
            vals = []
            for L in config.size_list:
                r = crit.compute_record(eta, L, config.excitations(L), args.at, J=config.J, tol=config.tol,
                                        seed=config.seed, with_cfi=False)
                vals.append(r.qfi)
            try:
                rows.append(_fit_row(eta, crit.fit_beta(list(config.size_list), vals)))
            except StarkProbeError as exc:
                log.error("eta=%s: %s", format_eta(eta), exc)
                bad += 1
    else:
        records = pl.read_csv(args.input) if args.input else None
        peaks = _peaks(args, config, records)
        for eta in config.eta_list:
            pts = [(L, peaks[(eta, L)].qfi_max) for L in config.size_list
                   if not isinstance(peaks[(eta, L)], Exception)]
            try:
                rows.append(_fit_row(eta, crit.fit_beta([p[0] for p in pts], [p[1] for p in pts])))
            except StarkProbeError as exc:
                log.error("eta=%s: %s", format_eta(eta), exc)
                bad += 1
    if rows:
        _emit(rows, config, "fit_beta")
    return _status(len(config.eta_list), bad)


def cmd_fit_z(args, config):
    rows, bad = [], 0
    peaks = None
    if args.at is None and args.phase == "transition":
        peaks = _peaks(args, config, pl.read_csv(args.input) if args.input else None)
    for eta in config.eta_list:
        pts = []
        for L in config.size_list:
            if args.at is not None:
                h = args.at
            elif args.phase == "extended":
                h = config.h_extended
            elif args.phase == "localized":
                h = config.h_localized
            else:
                p = peaks[(eta, L)]
                if isinstance(p, Exception):
                    continue
                h = p.h_max
            try:
                op = build_operator(ProbeParams(L, config.excitations(L), eta, config.J, h))
                pts.append((L, solve_gap(op, seed=config.seed)))
            except StarkProbeError as exc:
                log.warning("gap eta=%s L=%d: %s", format_eta(eta), L, exc)
        try:
            rows.append(_fit_row(eta, crit.fit_z([p[0] for p in pts], [p[1] for p in pts], args.phase)))
        except StarkProbeError as exc:
            log.error("eta=%s: %s", format_eta(eta), exc)
            bad += 1
    if rows:
        _emit(rows, config, "fit_z")
    return _status(len(config.eta_list), bad)


def cmd_fit_alpha(args, config):
    records = _records(args, config)
    rows, bad = [], 0
    for eta in config.eta_list:
        try:
            fit = crit.fit_alpha([r for r in records if r.eta == eta], args.h_ref, h_window=(None, config.h_stop))
            rows.append(_fit_row(eta, fit))
        except StarkProbeError as exc:
            log.error("eta=%s: %s", format_eta(eta), exc)
            bad += 1
    if rows:
        _emit(rows, config, "fit_alpha")
    return _status(len(config.eta_list), bad)


def cmd_collapse(args, config):
    records = _records(args, config)
    init = config.collapse_init
    if args.init:
        try:
            init = tuple(float(x) for x in args.init.split(","))
            if len(init) != 3:
                raise ValueError
        except ValueError:
            raise ConfigError(f"--init needs h_c,alpha,nu, got {args.init!r}") from None
    rows, bad = [], 0
    for eta in config.eta_list:
        sizes = config.collapse_sizes or config.size_list
        try:
            c = crit.collapse([r for r in records if r.eta == eta and r.L in sizes], init=init)
            rows.append({"eta": format_eta(eta), "h_c": c.h_c, "alpha": c.alpha, "nu": c.nu,
                         "alpha_over_nu": c.alpha_over_nu, "quality": c.quality,
                         "d_h_c": c.uncertainty["h_c"], "d_alpha": c.uncertainty["alpha"],
                         "d_nu": c.uncertainty["nu"]})
        except StarkProbeError as exc:
            log.error("eta=%s: %s", format_eta(eta), exc)
            bad += 1
    if rows:
        _emit(rows, config, "collapse")
    return _status(len(config.eta_list), bad)


def cmd_pipeline(args, config):
    records = pl.read_csv(args.input) if args.input else None
    res = pl.run_pipeline(config, records, solve=not args.no_solve)
    log.info("report -> %s", Path(config.out) / "report.json")
    return res.exit_code


def cmd_oracle_check(args, config):
    from . import oracle
    from .basis import build_basis
    from .hamiltonian import dense_matrix
    from .metrology import qfi

    rows, bad = [], 0
    for eta in config.eta_list:
        for L in range(2, min(args.max_l, oracle.ORACLE_MAX_SITES) + 1):
            ref = oracle.dense_full_hamiltonian(ProbeParams(L, 0, eta, config.J, 0.37))
            comm = ref.commutator_norm()
            worst = 0.0
            for N in range(L + 1):
                mine = dense_matrix(build_operator(ProbeParams(L, N, eta, config.J, 0.37), build_basis(L, N)))
                worst = max(worst, float(np.max(np.abs(mine - ref.sector_block(N)))))
            ok = worst == 0.0 and comm == 0.0
            rows.append({"check": "hamiltonian", "eta": format_eta(eta), "L": L, "max_abs_diff": worst,
                         "commutator": comm, "pass": ok})
            bad += not ok
        L = min(args.max_l, 8)
        params = ProbeParams(L, L // 2, eta, config.J, 0.37)
        mine, theirs = qfi(params).qfi, oracle.qfi_by_differentiation(params)
        rel = abs(mine - theirs) / abs(theirs)
        ok = rel < 5e-3
        rows.append({"check": "qfi", "eta": format_eta(eta), "L": L, "max_abs_diff": rel,
                     "commutator": math.nan, "pass": ok})
        bad += not ok
    _emit(rows, config, "oracle_check")
    return EXIT_OK if bad == 0 else (EXIT_FAILED if bad == len(rows) else EXIT_PARTIAL)


COMMANDS = {
    "sweep": cmd_sweep,
    "peak": cmd_peak,
    "fit-alpha": cmd_fit_alpha,
    "fit-beta": cmd_fit_beta,
    "fit-z": cmd_fit_z,
    "collapse": cmd_collapse,
    "pipeline": cmd_pipeline,
    "oracle-check": cmd_oracle_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr,
    )
    t0 = time.perf_counter()
    try:
        config = load_config(args)
        code = COMMANDS[args.command](args, config)
    except (ConfigError, OSError) as exc:
        print(f"starkprobe: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StarkProbeError as exc:
        print(f"starkprobe: {exc}", file=sys.stderr)
        return EXIT_FAILED
    log.info("%s finished in %.1f s (exit %d)", args.command, time.perf_counter() - t0, code)
    return code


if __name__ == "__main__":
    sys.exit(main())

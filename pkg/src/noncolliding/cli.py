"""Command-line entry points: simulate, converge, validate, config-dump.

Exit codes: 0 success, 1 validation-suite failure, 2 configuration error,
3 runtime/experiment failure.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .brownian import generate, split
from .config import ConfigError, RunConfig, apply_overrides, dump_config, load_config, parse_config
from .convergence import (
    DegenerateFit,
    ExperimentError,
    MseTable,
    RateReport,
    fit_rate,
    ordering_sweep,
    run_mse_experiment,
    scheme_coincidence,
    strong_error_vs_exact,
)
from .model import field_from_name, nearest_neighbor, uniform_system
from .schemes import PathAborted, Scheme, simulate_path, write_trajectory_csv
from .solver import ImplicitProblem, SolverOptions, solve, solve_pair_closed_form

__all__ = ["main", "app"]


def _resolve_config(name: str) -> RunConfig:
    path = Path(name)
    if path.exists():
        return load_config(path)
    preset = resources.files("noncolliding").joinpath(f"presets/{name}.cfg")
    if preset.is_file():
        return parse_config(preset.read_text())
    raise ConfigError("--config", f"no such config file or preset: {name}")


def _load(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config", "a config file or preset name is required")
    cfg = _resolve_config(args.config)
    cfg = apply_overrides(cfg, args.overrides)
    if args.seed is not None:
        cfg = apply_overrides(cfg, [f"experiment.seed={args.seed}"])
    if args.out is not None:
        cfg = apply_overrides(cfg, [f"output.directory={args.out}"])
    if getattr(args, "quick", False):
        cfg = apply_overrides(cfg, [f"experiment.paths={min(cfg.paths, 200)}"])
    return cfg


def _fmt(x: float) -> str:
    return repr(float(x))


# --- simulate ----------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _load(args)
    system = cfg.build_system()
    opts = cfg.solver_options()
    level = args.level if args.level is not None else cfg.k_max
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for scheme in cfg.scheme_kinds():
        for i in range(args.paths):
            grid = generate(split(cfg.seed, i), system.d, level, system.horizon)
            traj = simulate_path(system, scheme, grid, opts)
            dest = out_dir / f"trajectory_{scheme.value}_{i:03d}.csv"
            write_trajectory_csv(traj, dest)
            print(
                f"{dest}: level={level} min_gap={traj.min_gap():.6g} "
                f"newton_iterations={traj.newton_iterations} max_residual={traj.max_residual:.3e}"
            )
    return 0


# --- converge ----------------------------------------------------------------


def _write_mse_csv(table: MseTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "k", "mse", "stderr", "discards"])
        for scheme, rows in table.entries.items():
            for e in rows:
                w.writerow([scheme.value, e.k, _fmt(e.mse), _fmt(e.stderr), e.discards])


def _write_rates_csv(report: RateReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "beta", "intercept", "r2"])
        for scheme, fit in report.fits.items():
            if fit is None:
                w.writerow([scheme.value, "DegenerateFit", "", ""])
            else:
                w.writerow([scheme.value, _fmt(fit.beta), _fmt(fit.intercept), _fmt(fit.r2)])


def _write_plotdata_csv(table: MseTable, report: RateReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "k", "log2_mse", "fitted_line"])
        for scheme, rows in table.entries.items():
            fit = report.fits.get(scheme)
            for e in rows:
                log2_mse = (
                    _fmt(math.log2(e.mse)) if math.isfinite(e.mse) and e.mse > 0.0 else ""
                )
                line = _fmt(-2.0 * fit.beta * e.k + fit.intercept) if fit is not None else ""
                w.writerow([scheme.value, e.k, log2_mse, line])


def cmd_converge(args) -> int:
    cfg = _load(args)
    exp = cfg.experiment_config()
    table = run_mse_experiment(exp, workers=args.workers)
    try:
        report = fit_rate(table)
    except DegenerateFit as exc:
        report = exc.report
        print(f"warning: {exc}", file=sys.stderr)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_mse_csv(table, out_dir / "mse.csv")
    _write_rates_csv(report, out_dir / "rates.csv")
    _write_plotdata_csv(table, report, out_dir / "plotdata.csv")
    print(f"paths={table.paths} coupling_audited={table.audited_paths}")
    for scheme, fit in report.fits.items():
        if fit is None:
            print(f"{scheme.value}: DegenerateFit")
        else:
            print(
                f"{scheme.value}: beta={fit.beta:.4f} intercept={fit.intercept:.4f} "
                f"r2={fit.r2:.5f} points={fit.n_points}"
            )
    print(f"wrote {out_dir / 'mse.csv'}, {out_dir / 'rates.csv'}, {out_dir / 'plotdata.csv'}")
    return 0


# --- validate ----------------------------------------------------------------


def _check_pair_oracle(n: int, opts: SolverOptions, seed: int):
    rng = np.random.Generator(np.random.PCG64(seed))
    worst = 0.0
    for _ in range(n):
        a = rng.uniform(-5.0, 5.0, size=2)
        h = rng.uniform(1e-4, 1.0)
        g = rng.uniform(0.1, 10.0)
        x = solve(ImplicitProblem(a, h, nearest_neighbor(2, g)), opts)
        ref = solve_pair_closed_form(a[0], a[1], h, g)
        worst = max(worst, abs(x[0] - ref[0]), abs(x[1] - ref[1]))
    return worst <= 1e-10, f"max |solve - closed form| = {worst:.3e} over {n} problems"


def _reference_system(sigma_name: str):
    return uniform_system(
        d=10,
        gamma=nearest_neighbor(10, 1.0),
        b=field_from_name("sin"),
        sigma=field_from_name(sigma_name),
        x0=np.arange(1.0, 11.0),
        horizon=1.0,
    )


def _check_coincidence(paths: int, level: int, opts: SolverOptions, seed: int):
    worst = scheme_coincidence(_reference_system("constant(0.5)"), level, paths, seed, opts)
    return worst <= 1e-15, f"max |SIM - SIEM| = {worst:.3e} over {paths} paths"


def _check_exact_orders(paths: int, seed: int):
    report = strong_error_vs_exact(k_min=2, k_max=7, paths=paths, seed=seed)
    bm = report.fits[Scheme.SIM].beta
    be = report.fits[Scheme.SIEM].beta
    ok = 0.85 <= bm <= 1.15 and 0.35 <= be <= 0.65
    return ok, f"fitted orders: sim={bm:.3f} (want [0.85,1.15]), siem={be:.3f} (want [0.35,0.65])"


def _check_ordering(paths: int, level: int, opts: SolverOptions, seed: int, workers: int):
    sys_ = _reference_system("halfsin2")
    bad = 0
    aborted = 0
    rows = 0
    for kind in (Scheme.SIM, Scheme.SIEM):
        sweep = ordering_sweep(sys_, kind, level, paths, seed, opts, workers)
        bad += sweep.ordering_violations
        aborted += sweep.aborted_paths
        rows += sweep.rows_checked
    ok = bad == 0 and aborted == 0
    return ok, f"{rows} rows checked, {bad} ordering violations, {aborted} aborted paths"


def cmd_validate(args) -> int:
    base = RunConfig(
        d=10, gamma="nearest_neighbor(1.0)", b="sin", sigma="halfsin2",
        x0="arithmetic(1.0, 1.0)", horizon=1.0, schemes=("sim", "siem"),
        k_min=1, k_max=5, paths=1000, seed=args.seed if args.seed is not None else 20260811,
    )
    cfg = apply_overrides(base, args.overrides)
    opts = cfg.solver_options()
    quick = args.quick
    checks = [
        ("pair-oracle-sweep", lambda: _check_pair_oracle(2000 if quick else 10_000, opts, cfg.seed)),
        ("scheme-coincidence", lambda: _check_coincidence(20 if quick else 100, 5, opts, cfg.seed)),
        ("exact-solution-orders", lambda: _check_exact_orders(2000 if quick else 10_000, cfg.seed)),
        ("non-colliding-sweep", lambda: _check_ordering(
            10 if quick else 100, 5 if quick else 6, opts, cfg.seed, args.workers)),
    ]
    failures = 0
    for name, fn in checks:
        ok, detail = fn()
        if not ok:
            failures += 1
        print(f"{name:24s} {'PASS' if ok else 'FAIL':4s}  {detail}")
    return 0 if failures == 0 else 1


# --- config-dump ---------------------------------------------------------------


def cmd_config_dump(args) -> int:
    cfg = _load(args)
    cfg.experiment_config()  # full validation before echoing
    sys.stdout.write(dump_config(cfg))
    return 0


# --- parser -------------------------------------------------------------------


def _add_common(p, config_required=True):
    if config_required:
        p.add_argument("--config", metavar="PATH", help="config file or preset name (case1..case3)")
    p.add_argument("--seed", type=int, default=None, help="override experiment.seed")
    p.add_argument("--workers", type=int, default=1, help="worker processes for path loops")
    p.add_argument("--out", default=None, help="override output.directory")
    p.add_argument("overrides", nargs="*", metavar="section.key=value", help="config overrides")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noncolliding",
        description="Semi-implicit schemes for non-colliding particle SDEs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write trajectory CSVs for each scheme")
    _add_common(p)
    p.add_argument("--level", type=int, default=None, help="dyadic level (default experiment.k_max)")
    p.add_argument("--paths", type=int, default=1, help="paths per scheme")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("converge", help="run the coupled-refinement rate experiment")
    _add_common(p)
    p.add_argument("--quick", action="store_true", help="cap paths at 200")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("validate", help="run the built-in pass/fail suite")
    _add_common(p, config_required=False)
    p.add_argument("--quick", action="store_true", help="reduced sweep sizes")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("config-dump", help="echo the effective config in canonical form")
    _add_common(p)
    p.set_defaults(func=cmd_config_dump)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PathAborted as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 3
    except ExperimentError as exc:
        print(f"experiment failed: {exc}", file=sys.stderr)
        return 3


def app() -> None:
    raise SystemExit(main())
